"""Global numerical constants shared across the package."""

#: Reduced Planck constant. Every formula carries it explicitly.
HBAR = 1.0

#: Absolute tolerance for Hermiticity / positivity after normalizing by the operator norm.
ATOL = 1e-10

#: Tolerance for POVM normalization and trace preservation.
NORM_TOL = 1e-9


def set_hbar(value: float) -> None:
    global HBAR
    if value <= 0:
        raise ValueError("hbar must be positive")
    HBAR = float(value)


def hbar() -> float:
    return HBAR
