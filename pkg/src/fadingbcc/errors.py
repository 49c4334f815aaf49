"""Failure types shared across the solver layers."""

from __future__ import annotations


class NumericFailure(RuntimeError):
    """A numerical routine failed to converge; diagnostics ride along."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        base = super().__str__()
        if not self.diagnostics:
            return base
        detail = ", ".join(f"{k}={v!r}" for k, v in sorted(self.diagnostics.items()))
        return f"{base} ({detail})"
