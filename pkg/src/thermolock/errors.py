"""Exception hierarchy.

Protocol runners catch :class:`ProtocolAbort` subclasses and turn them into a
rejected outcome with ``failure_reason`` set; everything else propagates.
"""


class ThermolockError(Exception):
    """Base class for all package errors."""


class ConfigError(ThermolockError, ValueError):
    """Invalid parameters, detected before any run starts."""


class InvalidLength(ConfigError):
    pass


class ProtocolAbort(ThermolockError):
    """A resource or rule violation that aborts the current run as a reject."""

    reason = "aborted"


class BudgetExhausted(ProtocolAbort):
    reason = "budget_exhausted"


class IllegalExtraction(ProtocolAbort):
    reason = "illegal_extraction"


class RefusedCopy(ProtocolAbort):
    reason = "refused_copy"


class NotOwner(ProtocolAbort):
    reason = "not_owner"


class TellCapExceeded(ProtocolAbort):
    reason = "tell_cap_exceeded"


class WorkspaceExceeded(ProtocolAbort):
    reason = "workspace_exceeded"


class WidthMismatch(ProtocolAbort):
    reason = "width_mismatch"


class CapExceeded(ProtocolAbort):
    """An adversary tried to keep more stored bits than its budget allows."""

    reason = "cap_exceeded"


class CombineMismatch(ProtocolAbort):
    reason = "combine_mismatch"


class MustReemit(ProtocolAbort):
    reason = "must_reemit"


class InvalidNote(ProtocolAbort):
    reason = "invalid_note"


class DoubleSpend(ProtocolAbort):
    reason = "double_spend"


class UnknownRecord(ProtocolAbort):
    reason = "unknown_record"


class CausalityViolation(ThermolockError):
    """A message was scheduled to arrive faster than light allows."""


class SimulationError(ThermolockError):
    """The non-transferability simulator cannot reproduce a strategy's access pattern."""
