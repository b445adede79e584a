"""Sparse nonlinear variable selection and sparse Granger modelling toolkit.

Modules
-------
kernels         kernel functions, derivative matrices, kernel ridge regression
optim           simplex projection, proximal operators, FISTA, ridge, sparse baselines
srff            sparse random Fourier features (learned per-dimension scales)
nvsd            derivative-regularized kernel variable selection via ADMM
granger_linear  VAR design, clustered low-rank sparse VAR, linear baselines
granger_kernel  partitioned-kernel nonlinear Granger models
datasets        synthetic generators and stationarizing transforms
metrics         error and support-recovery metrics
experiments     experiment protocol (splits, grids, resampling)
model_io        model / result persistence
cli             command line interface
"""

__version__ = "0.1.0"
