"""Numerical laboratory for the Moran operator on C([0, 1])."""

from .functions import TestFunction, parse_function_spec
from .lattice import (
    KernelVariant,
    LatticeFunction,
    TransitionMatrix,
    apply_operator,
    bernstein_apply,
    build_transition_matrix,
    evaluate_offlattice,
    iterate_operator,
)
from .poly import Polynomial, apply_generator, poly_derivative, semigroup_exact, sup_norm
from .sim import RngPlan, mc_semigroup, sample_chain_path, sample_wf_path

__all__ = [
    "KernelVariant",
    "LatticeFunction",
    "Polynomial",
    "RngPlan",
    "TestFunction",
    "TransitionMatrix",
    "apply_generator",
    "apply_operator",
    "bernstein_apply",
    "build_transition_matrix",
    "evaluate_offlattice",
    "iterate_operator",
    "mc_semigroup",
    "parse_function_spec",
    "poly_derivative",
    "sample_chain_path",
    "sample_wf_path",
    "semigroup_exact",
    "sup_norm",
]
