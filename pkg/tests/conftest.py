import os

# single-threaded BLAS: faster on this suite's small matrices and keeps
# timing-sensitive acceptance budgets stable (set before numpy loads)
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")
