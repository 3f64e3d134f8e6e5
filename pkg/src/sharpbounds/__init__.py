"""Sharp bounds on discrete causal estimands by polynomial programming."""

from ._accel import HAVE_NUMBA, USE_NUMBA
from .graph import CausalGraph, GraphError, canonicalize, districts, parse_graph
from .inference import ConfidenceRegion, gaussian_region, kl_region, loosen
from .program import (
    Evidence,
    EvidenceError,
    EvidenceTable,
    PolynomialProgram,
    build_program,
    classify,
    load_evidence,
    simplify,
)
from .query import QueryError, QuerySyntaxError, parse_query, polynomialize
from .solver import BoundsResult, SolveOptions, solve
from .strata import FunctionalModel, build_functional_model, reduce_deterministic

__version__ = "0.1.0"

__all__ = [
    "HAVE_NUMBA",
    "USE_NUMBA",
    "CausalGraph",
    "GraphError",
    "parse_graph",
    "canonicalize",
    "districts",
    "FunctionalModel",
    "build_functional_model",
    "reduce_deterministic",
    "QueryError",
    "QuerySyntaxError",
    "parse_query",
    "polynomialize",
    "Evidence",
    "EvidenceError",
    "EvidenceTable",
    "load_evidence",
    "PolynomialProgram",
    "build_program",
    "simplify",
    "classify",
    "SolveOptions",
    "BoundsResult",
    "solve",
    "ConfidenceRegion",
    "kl_region",
    "gaussian_region",
    "loosen",
    "__version__",
]
