"""Coarse Ricci curvature, transport-entropy inequalities and log-Sobolev
constants of finite Markov chains."""

__version__ = "0.1.0"

from .chain import (
    Distribution,
    FiniteChain,
    build_chain,
    chain_zoo,
    is_reversible,
    parse_zoo_spec,
    stationary_measure,
)
from .chainfile import parse_chain_file
from .curvature import coarse_ricci
from .drift import build_discrete_drift, information_rate
from .functional import dirichlet_form, heat_apply, lsi_constant, mlsi_constant
from .report import InequalityReport, Status
from .transport import relative_entropy, w1

__all__ = [
    "Distribution", "FiniteChain", "build_chain", "chain_zoo", "is_reversible",
    "parse_zoo_spec", "stationary_measure", "parse_chain_file", "coarse_ricci",
    "build_discrete_drift", "information_rate", "dirichlet_form", "heat_apply",
    "lsi_constant", "mlsi_constant", "InequalityReport", "Status", "relative_entropy", "w1",
]
