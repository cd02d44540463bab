"""Inverse-problem solvers for single-coil Cartesian k-space: l1-wavelet
compressed sensing (FISTA) and patch dictionary learning (OMP + K-SVD)."""
from .cs import CsParams, cs_fista, evaluate_objective_cs, zero_filled
from .dictl import (
    Dictionary,
    DictlParams,
    SparseCode,
    dictl_data_update,
    dictl_reconstruct,
    evaluate_objective_dictl,
    ksvd_update,
    omp,
    overcomplete_dct,
)

__all__ = [
    "CsParams", "cs_fista", "evaluate_objective_cs", "zero_filled",
    "Dictionary", "DictlParams", "SparseCode", "dictl_data_update", "dictl_reconstruct",
    "evaluate_objective_dictl", "ksvd_update", "omp", "overcomplete_dct",
]
