"""Normalizing flows built from L-diffeomorphisms: planar, radial and contractive residual layers.

Piecewise-smooth activations (ReLU, ELU, tanh, softplus) are allowed as long as
the non-smooth and critical sets are Lebesgue-null; every layer reports whether
its parameters give a bijection, and densities follow from the usual
change-of-variables formula evaluated along the inverse pass.
"""
from ._accel import backend
from .activations import Activation, Localization, Verdict, planar_condition, planar_validity
from .counterexample import SVCApprox, svc_build, svc_critical_measure, svc_distance, svc_integral, svc_measure
from .errors import (
    CenterPoint,
    ConfigParse,
    DepthTooLarge,
    DimMismatch,
    FlowError,
    InvalidFlow,
    MaxIter,
    NoBracket,
    NonFiniteLogDet,
    UnknownActivation,
)
from .flow_core import Flow, FlowChain, StandardNormal, exclusion_distance, log_density
from .planar import PlanarFlow, psi_scan
from .radial import RadialFlow, RadialScan, radial_validity, scan_radial
from .residual import ContractiveResidualFlow, flow_lipschitz_bound, spectral_normalize
from .scalar_solve import MonotoneProblem, solve_monotone
from .verify import VerificationReport, run_suite

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "CenterPoint",
    "ConfigParse",
    "ContractiveResidualFlow",
    "DepthTooLarge",
    "DimMismatch",
    "Flow",
    "FlowChain",
    "FlowError",
    "InvalidFlow",
    "Localization",
    "MaxIter",
    "MonotoneProblem",
    "NoBracket",
    "NonFiniteLogDet",
    "PlanarFlow",
    "RadialFlow",
    "RadialScan",
    "SVCApprox",
    "StandardNormal",
    "UnknownActivation",
    "Verdict",
    "VerificationReport",
    "backend",
    "exclusion_distance",
    "flow_lipschitz_bound",
    "log_density",
    "planar_condition",
    "planar_validity",
    "psi_scan",
    "radial_validity",
    "run_suite",
    "scan_radial",
    "solve_monotone",
    "spectral_normalize",
    "svc_build",
    "svc_critical_measure",
    "svc_distance",
    "svc_integral",
    "svc_measure",
]
