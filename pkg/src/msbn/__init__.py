"""Exact inference in multiply sectioned Bayesian networks.

A model is a hypertree of Bayesian subnets that agree on their shared
variables (d-sepsets).  Compilation turns it into a linked junction forest;
extended Shafer-Shenoy or extended lazy propagation then answers posterior
queries without ever materializing the global joint, which a brute-force
enumeration oracle cross-checks.
"""

from .factors import (
    CellMeter,
    Factor,
    FactorError,
    ScopeOverflow,
    indicator,
    product,
    unit_factor,
)
from .model import (
    Dag,
    HypertreeMSBN,
    ModelError,
    Subnet,
    Variable,
    Violation,
    check_evidence,
    make_msbn,
    validate_hypertree,
    validate_msbn,
)
from .compile import (
    CompileError,
    InvalidMsbn,
    LinkedJunctionForest,
    Linkage,
    MessageJF,
    StorageStats,
    compile_msbn,
    storage_stats,
)
from .engine import (
    EngineError,
    ImpossibleEvidence,
    LJFSession,
    NumericUnderflow,
    extended_lazy_propagate,
    extended_ss_propagate,
    lazy_propagate_jt,
    query_posterior,
    ss_propagate_jt,
)
from .oracle import StateSpaceTooLarge, joint_enumerate, oracle_posterior
from .fileformat import (
    MsbnDocument,
    MsbnParseError,
    MsbnSemanticError,
    MsbnSyntaxError,
    document_from_msbn,
    parse_evidence,
    parse_msbn,
    serialize_msbn,
)
from .random_nets import random_bn, random_msbn, random_sectioned_graph

__version__ = "0.1.0"

__all__ = [
    "CellMeter",
    "CompileError",
    "Dag",
    "EngineError",
    "Factor",
    "FactorError",
    "HypertreeMSBN",
    "ImpossibleEvidence",
    "InvalidMsbn",
    "LJFSession",
    "Linkage",
    "LinkedJunctionForest",
    "MessageJF",
    "ModelError",
    "MsbnDocument",
    "MsbnParseError",
    "MsbnSemanticError",
    "MsbnSyntaxError",
    "NumericUnderflow",
    "ScopeOverflow",
    "StateSpaceTooLarge",
    "StorageStats",
    "Subnet",
    "Variable",
    "Violation",
    "check_evidence",
    "compile_msbn",
    "document_from_msbn",
    "extended_lazy_propagate",
    "extended_ss_propagate",
    "indicator",
    "joint_enumerate",
    "lazy_propagate_jt",
    "make_msbn",
    "oracle_posterior",
    "parse_evidence",
    "parse_msbn",
    "product",
    "query_posterior",
    "random_bn",
    "random_msbn",
    "random_sectioned_graph",
    "serialize_msbn",
    "ss_propagate_jt",
    "storage_stats",
    "unit_factor",
    "validate_hypertree",
    "validate_msbn",
]
