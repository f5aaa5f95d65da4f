"""Operator-valued spectral decomposition of compact operators on Hilbert
modules over finite W*-algebras, modeled as weighted direct sums of matrix
algebras over a finite grid."""

from .algebra import (
    AlgebraField,
    ParameterGrid,
    Projection,
    center_trace,
    functional_calculus,
    lattice_join_meet,
    lemma22_cutoff,
    spectral_projection,
    splice_subprojection,
    trace_tau,
)
from .diagonalizer import (
    ModuleOperator,
    SpectralDecomposition,
    compactness_profile,
    compare_ordered,
    counting_function,
    diagonalize,
    extract_eigenpair,
    lambda_cut,
    sandwich_projections,
    sign_split,
)
from .module import ModuleVector, complement_basis, inner, normalize_over_A, project_onto_span, tail_profile
from .quadform import QuadraticForm, evaluate, kyfan_value, maximize_on_ball, verify_invariant_subspace

__version__ = "0.1.0"

__all__ = [
    "AlgebraField",
    "ParameterGrid",
    "Projection",
    "center_trace",
    "functional_calculus",
    "lattice_join_meet",
    "lemma22_cutoff",
    "spectral_projection",
    "splice_subprojection",
    "trace_tau",
    "ModuleOperator",
    "SpectralDecomposition",
    "compactness_profile",
    "compare_ordered",
    "counting_function",
    "diagonalize",
    "extract_eigenpair",
    "lambda_cut",
    "sandwich_projections",
    "sign_split",
    "ModuleVector",
    "complement_basis",
    "inner",
    "normalize_over_A",
    "project_onto_span",
    "tail_profile",
    "QuadraticForm",
    "evaluate",
    "kyfan_value",
    "maximize_on_ball",
    "verify_invariant_subspace",
]
