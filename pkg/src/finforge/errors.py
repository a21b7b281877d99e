"""Exception hierarchy shared across the engine.

Every error that crosses a module boundary derives from FinforgeError so the
service layer can map it to a structured wire response. `code` is the stable
machine-readable identifier used in error bodies.
"""

from __future__ import annotations


class FinforgeError(Exception):
    code = "internal"

    def __init__(self, message: str, detail: object = None):
        super().__init__(message)
        self.message = message
        self.detail = detail

    def to_body(self) -> dict:
        return {"code": self.code, "message": self.message, "detail": self.detail}


class InputError(FinforgeError):
    """Caller supplied something invalid (maps to a 4xx response)."""

    code = "invalid_input"


class UnknownIdError(InputError):
    code = "unknown_id"


class DuplicateIdError(InputError):
    code = "duplicate_id"


class AlreadyResolvedError(InputError):
    code = "already_resolved"


class EmptyPoolError(InputError):
    code = "empty_pool"


class MalformedOutputError(InputError):
    """Model output violates the reasoning-tag protocol (unbalanced tags)."""

    code = "malformed_output"


class SolveError(FinforgeError):
    """The hidden variable has no admissible solution."""

    code = "no_solution"


class ConsistencyFault(FinforgeError):
    """Internal invariant broke: stored gold disagrees with a recompute.

    This is never swallowed; it indicates corrupted state or a bug.
    """

    code = "consistency_fault"


class ExecutionError(FinforgeError):
    """Verification program failed (timeout, nonzero exit, bad output)."""

    code = "execution_failed"

    def __init__(self, message: str, *, kind: str, detail: object = None):
        super().__init__(message, detail)
        self.kind = kind  # "timeout" | "nonzero_exit" | "bad_output"


class JudgeUnavailableError(FinforgeError):
    """Judge endpoint unreachable or returned garbage; callers must escalate,
    never substitute a default score."""

    code = "judge_unavailable"


class StoreError(FinforgeError):
    code = "store_error"
