"""Dense complex-matrix substrate.

Operators are plain ``numpy`` arrays of shape ``(d, d)``; states and effects
are operators satisfying extra invariants that :func:`check_state` and
:func:`check_effect` enforce.  Position and momentum live on a periodic grid
(:class:`OutcomeGrid`) with the momentum operator obtained by unitary
conjugation of a diagonal matrix with the centered discrete Fourier transform.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import config


@dataclass(frozen=True)
class OutcomeGrid:
    """Uniform periodic lattice ``x_j = (j - n/2 + offset) * spacing``.

    ``offset=0`` puts a point at the origin (one extra point on the negative
    side); ``offset=0.5`` gives a grid that is exactly symmetric under
    ``x -> -x``.
    """

    n_points: int
    length: float
    offset: float = 0.0

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 1:
            raise ValueError(f"n_points must be a positive integer, got {self.n_points}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(self, "length", float(self.length))

    @property
    def spacing(self) -> float:
        return self.length / self.n_points

    @cached_property
    def points(self) -> np.ndarray:
        j = np.arange(self.n_points)
        return (j - self.n_points // 2 + self.offset) * self.spacing

    def __len__(self) -> int:
        return self.n_points

    def scaled(self, factor: float) -> "OutcomeGrid":
        """Same number of points, window and spacing multiplied by ``factor``."""
        return OutcomeGrid(self.n_points, self.length * factor, self.offset)

    def momentum_grid(self, hbar: float | None = None) -> "OutcomeGrid":
        """Conjugate grid ``p_k = (k - n/2 + offset) * 2*pi*hbar / L``."""
        hbar = config.HBAR if hbar is None else hbar
        return OutcomeGrid(self.n_points, self.n_points * 2 * np.pi * hbar / self.length, self.offset)

    def fourier_matrix(self, hbar: float | None = None) -> np.ndarray:
        """Unitary ``F[k, j] = exp(-i p_k x_j / hbar) / sqrt(n)`` (position -> momentum)."""
        hbar = config.HBAR if hbar is None else hbar
        p = self.momentum_grid(hbar).points
        return np.exp(-1j * np.outer(p, self.points) / hbar) / np.sqrt(self.n_points)

    def index_of(self, x: float) -> int:
        """Index of the cell containing ``x`` (periodic)."""
        j = int(np.round(x / self.spacing - self.offset)) + self.n_points // 2
        return j % self.n_points

    def cell_offsets(self) -> np.ndarray:
        """Signed displacement ``d * spacing`` for each kernel index ``d`` in centered order."""
        return self.points - self.offset * self.spacing


# -- validation -----------------------------------------------------------------------


def _scale(a: np.ndarray) -> float:
    s = np.linalg.norm(a, 2) if a.size else 0.0
    return max(s, 1.0)


def is_hermitian(a: np.ndarray, tol: float = config.ATOL) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.abs(a - a.conj().T).max() <= tol * _scale(a)


def check_state(t: np.ndarray, tol: float = config.ATOL) -> np.ndarray:
    t = np.asarray(t, dtype=complex)
    if not is_hermitian(t, tol):
        raise ValueError("state is not Hermitian")
    if abs(np.trace(t).real - 1) > tol:
        raise ValueError(f"state trace {np.trace(t).real!r} != 1")
    if np.linalg.eigvalsh(t)[0] < -tol:
        raise ValueError("state is not positive semidefinite")
    return t


def check_effect(e: np.ndarray, tol: float = config.ATOL) -> np.ndarray:
    e = np.asarray(e, dtype=complex)
    if not is_hermitian(e, tol):
        raise ValueError("effect is not Hermitian")
    w = np.linalg.eigvalsh(e)
    if w[0] < -tol or w[-1] > 1 + tol:
        raise ValueError(f"effect spectrum [{w[0]:.3g}, {w[-1]:.3g}] outside [0, 1]")
    return e


# -- algebra ------------------------------------------------------------------------


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(a, b)


def partial_trace(t: np.ndarray, dims: tuple[int, int], keep: int = 1) -> np.ndarray:
    """Trace out one factor of a bipartite operator.

    ``keep=1`` returns the operator on the first factor, ``keep=2`` the second.
    """
    d1, d2 = dims
    t = np.asarray(t)
    if t.shape != (d1 * d2, d1 * d2):
        raise ValueError(f"operator of shape {t.shape} does not match dims {dims}")
    r = t.reshape(d1, d2, d1, d2)
    if keep == 1:
        return np.einsum("ajbj->ab", r)
    if keep == 2:
        return np.einsum("iaib->ab", r)
    raise ValueError("keep must be 1 or 2")


def eig_hermitian(a: np.ndarray, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvector columns of a Hermitian matrix."""
    a = np.asarray(a)
    if not is_hermitian(a, tol):
        raise ValueError("eig_hermitian requires a Hermitian matrix")
    return np.linalg.eigh((a + a.conj().T) / 2)


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    """Square root of a PSD matrix; eigenvalues below zero are clamped."""
    w, v = np.linalg.eigh((a + a.conj().T) / 2)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def trace_norm(a: np.ndarray) -> float:
    a = np.asarray(a)
    if is_hermitian(a, 1e-12):
        return float(np.abs(np.linalg.eigvalsh((a + a.conj().T) / 2)).sum())
    return float(np.linalg.svd(a, compute_uv=False).sum())


def projector(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def basis_vector(d: int, k: int) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[k] = 1
    return v


def schmidt_entropy(psi: np.ndarray, dims: tuple[int, int], tol: float = config.ATOL) -> float:
    """Entanglement entropy (nats) of a bipartite pure state."""
    psi = np.asarray(psi, dtype=complex)
    if abs(np.linalg.norm(psi) - 1) > tol:
        raise ValueError("schmidt_entropy requires a unit vector")
    s = np.linalg.svd(psi.reshape(dims), compute_uv=False) ** 2
    s = s[s > 1e-15]
    return float(max(-(s * np.log(s)).sum(), 0.0))


# -- grid operators -------------------------------------------------------------------


def position_operator(g: OutcomeGrid) -> np.ndarray:
    return np.diag(g.points).astype(complex)


def momentum_operator(g: OutcomeGrid, hbar: float | None = None) -> np.ndarray:
    hbar = config.HBAR if hbar is None else hbar
    f = g.fourier_matrix(hbar)
    p = g.momentum_grid(hbar).points
    return (f.conj().T * p) @ f


def function_of_momentum(g: OutcomeGrid, fn, hbar: float | None = None) -> np.ndarray:
    """``fn(P)`` through the Fourier diagonalization."""
    hbar = config.HBAR if hbar is None else hbar
    f = g.fourier_matrix(hbar)
    p = g.momentum_grid(hbar).points
    return (f.conj().T * fn(p)) @ f


def translation_operator(g: OutcomeGrid, a: float, hbar: float | None = None) -> np.ndarray:
    """``exp(-i a P / hbar)``; shifts wavefunctions by ``+a``, exactly by whole cells."""
    hbar = config.HBAR if hbar is None else hbar
    return function_of_momentum(g, lambda p: np.exp(-1j * a * p / hbar), hbar)


def parity_operator(g: OutcomeGrid) -> np.ndarray:
    """Reflection ``x -> -x`` on the grid."""
    n = g.n_points
    j = np.arange(n)
    if g.offset == 0:
        target = (2 * (n // 2) - j) % n
    elif g.offset == 0.5:
        target = n - 1 - j
    else:
        raise ValueError("parity needs offset 0 or 0.5")
    r = np.zeros((n, n), dtype=complex)
    r[target, j] = 1
    return r


# -- random objects -----------------------------------------------------------------


def random_pure(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_state(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    t = g @ g.conj().T
    return t / np.trace(t).real


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (g + g.conj().T) / 2


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))
