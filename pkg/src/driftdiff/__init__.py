"""Diffusion in a drifted Brownian potential: simulation and limit-law checks.

Subpackages
-----------
env         random environment, scale function, hitting targets
bessel      squared Bessel tools, local-time profiles, Jacobi diffusions
stable      completely asymmetric stable sampling and limit-law constants
diffusion   the diffusion itself: path backend and Ray-Knight backend
variational singular Sturm-Liouville eigenvalue for the lower tail constant
stats       empirical-distribution machinery (ECDF, KS, DKW bands)
cli         reproducible experiment runner
"""

__version__ = "0.1.0"
