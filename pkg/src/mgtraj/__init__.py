"""Multi-generator GAN for multimodal pedestrian trajectory prediction."""
import os

# Single-threaded BLAS keeps float reductions in a fixed order, so training
# output does not depend on the machine's core count.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

__version__ = "0.1.0"
