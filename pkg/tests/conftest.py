"""Shared test configuration.

Long Monte Carlo runs memoize their deterministic failure counts under a
cache directory keyed by every parameter that affects the outcome.  The
tests default that directory to a repo-local path so precomputed sweep
results are reused; remove the directory (or point the environment
variable elsewhere) to recompute from scratch.
"""

import os
from pathlib import Path

os.environ.setdefault("SPINMESH_CACHE_DIR",
                      str(Path(__file__).resolve().parent.parent
                          / ".spinmesh-cache"))
