import os
import sys

# the library is a set of top-level modules next to this file
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
