"""Zhang sandpile model as a piecewise-affine skew-product dynamical system.

Library layout:

- ``lattice``     lattice geometry and model parameters
- ``relaxation``  one-step relaxation map, its matrix form, a-priori bounds
- ``dynamics``    skew-product driving, return maps, avalanche records
- ``geometry``    exact rational polytope engine: continuity atlas, region
                  iteration, removability certificates, Markov codings
- ``spectral``    Lyapunov spectra, contraction horizons, entropy estimates
- ``dimension``   attractor sampling, box counting, Moran-type bounds
- ``stats``       avalanche statistics, scaling sweeps, power-law fits
- ``cli``         command line front end with reproducible run manifests
"""

from .lattice import Lattice, ModelParams, ParamRegion, build_lattice, manhattan_distance, classify_params

__all__ = [
    "Lattice",
    "ModelParams",
    "ParamRegion",
    "build_lattice",
    "manhattan_distance",
    "classify_params",
]

__version__ = "0.1.0"
