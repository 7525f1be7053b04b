"""Request-to-model pipeline: parse, select, tune, and package."""

__version__ = "0.1.0"

from .errors import (
    ClientError,
    ContractError,
    DegenerateError,
    DuplicateError,
    ExtractError,
    FitError,
    IntegrityError,
    ParseError,
    ProposalError,
    ReqforgeError,
    SchemaError,
    SelectionError,
    TaxonomyError,
    UnderstandingError,
    UnitError,
)
from .schema import (
    CanonicalConfig,
    DataRequirement,
    DeployRequirement,
    Device,
    Engine,
    MetricTarget,
    ModelRequirement,
    Quantity,
    RequestConfig,
    SchemaWarning,
    Task,
    canonicalize,
    config_from_obj,
    config_to_obj,
    normalize_units,
    parse_request_config,
    serialize_config,
)

__all__ = [
    "__version__",
    "CanonicalConfig",
    "ClientError",
    "ContractError",
    "DataRequirement",
    "DegenerateError",
    "DeployRequirement",
    "Device",
    "DuplicateError",
    "Engine",
    "ExtractError",
    "FitError",
    "IntegrityError",
    "MetricTarget",
    "ModelRequirement",
    "ParseError",
    "ProposalError",
    "Quantity",
    "ReqforgeError",
    "RequestConfig",
    "SchemaError",
    "SchemaWarning",
    "SelectionError",
    "Task",
    "TaxonomyError",
    "UnderstandingError",
    "UnitError",
    "canonicalize",
    "config_from_obj",
    "config_to_obj",
    "normalize_units",
    "parse_request_config",
    "serialize_config",
]
