"""Shared configuration knobs and error types."""

import os


class CapacityError(ValueError):
    """Raised when a request exceeds a configured size limit."""


class ValidationError(ValueError):
    """Raised for malformed user input (rates, specs, configs)."""


def max_order():
    """Largest motif order the engine will handle (env MOMENTFORGE_MAX_ORDER)."""
    raw = os.environ.get("MOMENTFORGE_MAX_ORDER", "8")
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValidationError(f"MOMENTFORGE_MAX_ORDER must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ValidationError("MOMENTFORGE_MAX_ORDER must be >= 1")
    return value


def check_order(m):
    limit = max_order()
    if m > limit:
        raise CapacityError(f"order {m} exceeds configured maximum {limit}")
    return m


# Closure denominators below this (normalized) value make the closure vanish.
DENOMINATOR_GUARD = 1e-12

# Largest state space (n ** N) the exact oracle will build.
ORACLE_MAX_STATES = 2**14
# Up to this many states the oracle uses a dense matrix exponential.
ORACLE_DENSE_STATES = 4096
