"""marllab: a desk-scale cooperative multi-agent RL laboratory."""

import os

# Small-matrix training dominates every workload here; BLAS thread fan-out
# costs more than it buys (and seeds parallelise at the process level).
# Must be set before numpy initialises its BLAS; harmless otherwise.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

__version__ = "0.1.0"
