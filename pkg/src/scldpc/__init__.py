"""Spatially coupled LDPC code ensembles from protographs.

Construction of coupled base matrices, erasure- and Gaussian-channel
iterative-decoding thresholds, asymptotic weight-enumerator growth
rates, and finite-length lifting plus belief-propagation simulation.
"""

from .protograph import (
    BaseMatrix,
    CoupledSpec,
    EdgeSpreading,
    couple_tailbiting,
    couple_terminated,
    design_rate,
    family_ar4ja,
    family_arja,
    family_c36_alt,
    family_cjk,
    terminated_rate,
    validate_spreading,
)

__version__ = "0.1.0"
