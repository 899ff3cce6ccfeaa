"""Gaussian basis-set generation and variational optimization for restricted Hartree-Fock."""
from .basis import (
    BasisSet,
    NuclearField,
    basis_from_shells,
    cdo3_basis,
    grid_box_basis,
    make_cgto,
    make_mcgto,
    parse_gaussian94,
    parse_xyz,
)
from .grad import energy_gradient, gradcheck
from .integrals import BACKEND, build_tensors, set_threads
from .optim import OptimizerConfig, minimize, optimize_basis
from .pgraph import ParamGraph, ParamNode
from .scf import rhf, sym_orthogonalizer

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BasisSet", "NuclearField", "OptimizerConfig", "ParamGraph", "ParamNode",
    "basis_from_shells", "build_tensors", "cdo3_basis", "energy_gradient", "gradcheck",
    "grid_box_basis", "make_cgto", "make_mcgto", "minimize", "optimize_basis", "parse_gaussian94",
    "parse_xyz", "rhf", "set_threads", "sym_orthogonalizer",
]
