import numpy as np
import pandas as pd

from concavity import is_log_concave, is_ultra_log_concave
from instances import main, random_lc_p, random_lc_q, random_param_vector, random_pmf, random_ulc_p, rng_for


def test_rng_is_seeded():
    assert rng_for(3).integers(0, 1000, 5).tolist() == rng_for(3).integers(0, 1000, 5).tolist()


def test_compounding_laws_are_log_concave(rng):
    for _ in range(50):
        q = random_lc_q(rng)
        assert q.offset == 1 and q(1) > 0
        assert is_log_concave(q).holds


def test_count_laws(rng):
    for _ in range(50):
        p = random_ulc_p(rng)
        assert is_ultra_log_concave(p).holds
        lc = random_lc_p(rng)
        assert lc.offset == 0 and lc(1) > 0
        assert is_log_concave(lc).holds
        assert abs(random_pmf(rng).mass - 1) < 1e-12


def test_param_vector(rng):
    v = random_param_vector(rng, n=4, low=0.2, high=0.4)
    assert v.n == 4
    assert np.all((np.asarray(list(v)) >= 0.2) & (np.asarray(list(v)) <= 0.4))


def test_main_writes_csv(tmp_path, monkeypatch, capsys):
    out = tmp_path / "inst.csv"
    monkeypatch.setattr("sys.argv", ["instances.py", "--count", "2", "--seed", "5", "--output", str(out)])
    main()
    df = pd.read_csv(out)
    assert len(df) == 6
    assert set(df["kind"]) == {"lc-q", "ulc-p", "lc-p"}
    assert "Generated 6 instances" in capsys.readouterr().out
