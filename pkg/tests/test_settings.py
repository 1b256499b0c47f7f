import importlib

import pytest

import settings

VARS = (
    "CPENT_TAIL_EPS", "CPENT_LC_TOL", "CPENT_FD_STEP", "CPENT_UNDERFLOW_FLOOR", "CPENT_SEED",
    "CPENT_N_JOBS", "CPENT_SUPPORT_CAP", "CPENT_GRID_RESOLUTION", "CPENT_LOG_LEVEL",
)


@pytest.fixture
def env(monkeypatch):
    for name in VARS:
        monkeypatch.delenv(name, raising=False)
    yield monkeypatch
    monkeypatch.undo()
    importlib.reload(settings)


def test_defaults(env):
    importlib.reload(settings)
    assert settings.TAIL_EPS == 1e-12
    assert settings.LC_TOL == 1e-12
    assert settings.SEED == 20240601
    assert settings.N_JOBS == 1
    assert settings.LOG_LEVEL == "WARNING"


def test_environment_overrides(env):
    env.setenv("CPENT_SEED", "7")
    env.setenv("CPENT_N_JOBS", "-1")
    env.setenv("CPENT_TAIL_EPS", "1e-9")
    env.setenv("CPENT_LOG_LEVEL", "debug")
    importlib.reload(settings)
    assert settings.SEED == 7
    assert settings.N_JOBS == -1
    assert settings.TAIL_EPS == 1e-9
    assert settings.LOG_LEVEL == "DEBUG"
    assert settings.as_dict()["seed"] == 7


def test_blank_value_uses_default(env):
    env.setenv("CPENT_SUPPORT_CAP", "  ")
    importlib.reload(settings)
    assert settings.SUPPORT_CAP == 200


@pytest.mark.parametrize(
    "name,value",
    [
        ("CPENT_TAIL_EPS", "tiny"),
        ("CPENT_LC_TOL", "-1"),
        ("CPENT_SEED", "1.5"),
        ("CPENT_N_JOBS", "-2"),
        ("CPENT_SUPPORT_CAP", "0"),
        ("CPENT_LOG_LEVEL", "LOUD"),
    ],
)
def test_bad_values_raise(env, name, value):
    env.setenv(name, value)
    # the class is re-created by the reload, so match on the base type
    with pytest.raises(ValueError, match=name):
        importlib.reload(settings)
