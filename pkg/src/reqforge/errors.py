"""Shared exception types.

Every error raised across module boundaries derives from ReqforgeError so
callers can catch one base class at the pipeline boundary.
"""

from __future__ import annotations


class ReqforgeError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(ReqforgeError):
    """Input text is not well-formed (JSON syntax, file format)."""


class SchemaError(ReqforgeError):
    """Input parses but violates the request-config schema.

    The message names the offending key path.
    """


class UnitError(ReqforgeError):
    """A quantity carries a unit that cannot be normalized."""


class TaxonomyError(ReqforgeError):
    """Taxonomy file is malformed or its is_a graph is cyclic."""


class DuplicateError(ReqforgeError):
    """A name that must be unique appears more than once."""


class SelectionError(ReqforgeError):
    """No card in the zoo satisfies the request."""


class FitError(ReqforgeError):
    """A surrogate model could not be fitted."""


class ContractError(ReqforgeError):
    """A caller violated an interface precondition."""


class ExtractError(ReqforgeError):
    """No JSON payload could be extracted from a model reply.

    Carries the raw reply text on the ``raw`` attribute.
    """

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class ClientError(ReqforgeError):
    """A chat client could not produce a reply (transport or script)."""


class UnderstandingError(ReqforgeError):
    """The request could not be turned into a valid config."""


class ProposalError(ReqforgeError):
    """The model could not produce a valid hyperparameter setting."""


class DegenerateError(ReqforgeError):
    """A statistic is undefined for the given input (e.g. constant vector)."""


class IntegrityError(ReqforgeError):
    """A persisted artifact is truncated or its digest does not match."""
