"""Inaccuracy measures comparing an approximate observable with a sharp target.

Values are in grid units (length for position, momentum for momentum).
Grid observables live on a periodic lattice, so suprema over states are
taken on an *interior window*: the span of target eigenvectors whose cell
lies at least ``guard`` away from the edge of the grid.  Edge cells are
polluted by the periodic wrap of smearing kernels and never represent the
continuum behaviour.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import config
from .hilbert import OutcomeGrid
from .observables import (Distribution, Povm, moment_operator, momentum_pvm, noise_operator,
                          position_pvm, probability_distribution)

CERTIFICATES = ("exact", "lower-bound", "heuristic")

# Out-of-band value for "no finite inaccuracy at this confidence".
NO_FINITE_WIDTH = math.inf


@dataclass
class ErrorReport:
    measure_name: str
    value: float
    certificate: str = "exact"
    witness: Any = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.certificate not in CERTIFICATES:
            raise ValueError(f"certificate must be one of {CERTIFICATES}")
        if not self.value >= -1e-12:
            raise ValueError(f"{self.measure_name}: negative value {self.value}")
        self.value = max(float(self.value), 0.0)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)

    def __float__(self) -> float:
        return self.value

    def to_record(self) -> dict:
        rec = {"measure": self.measure_name,
               "value": self.value if self.finite else "inf",
               "certificate": self.certificate}
        for k, v in self.details.items():
            if isinstance(v, (int, float, str, bool)):
                rec[k] = v
        return rec


def distribution_stats(d: Distribution) -> tuple[float, float, float]:
    """Mean, variance and standard deviation of a numeric distribution."""
    var = max(d.var(), 0.0)
    return d.mean(), var, math.sqrt(var)


def interior_window(target: Povm, guard: float) -> np.ndarray:
    """Orthonormal columns spanning target eigenvectors with ``|x| <= L/2 - guard``."""
    g = target.grid
    if g is None or not target.is_commuting:
        raise ValueError("interior_window needs a sharp grid observable in commuting form")
    cells = np.flatnonzero(np.abs(g.points) <= g.length / 2 - guard + 1e-12)
    if len(cells) == 0:
        raise ValueError("guard band leaves no interior cells")
    # each cell owns the eigenvectors with weight 1 in that cell
    cols = np.flatnonzero(target.weights[cells].sum(axis=0) > 0.5)
    return target.basis[:, cols]


def _as_operator(target) -> np.ndarray:
    if isinstance(target, Povm):
        return moment_operator(target, 1)
    return np.asarray(target, dtype=complex)


def standard_error_terms(e: Povm, target, t: np.ndarray) -> tuple[float, float]:
    """Bias term ``tr T (E[1] - A)^2`` and noise term ``tr T N(E)``."""
    a = _as_operator(target)
    b = moment_operator(e, 1) - a
    t = np.asarray(t)
    bias = float(np.trace(t @ b @ b).real)
    noise = float(np.trace(t @ noise_operator(e)).real)
    return bias, noise


def standard_error_state(e: Povm, target, t: np.ndarray) -> float:
    """State-dependent standard error ``sqrt(bias + noise)``."""
    bias, noise = standard_error_terms(e, target, t)
    return math.sqrt(max(bias + noise, 0.0))


def _error_operator(e: Povm, target) -> np.ndarray:
    a = _as_operator(target)
    m1 = moment_operator(e, 1)
    return moment_operator(e, 2) - m1 @ a - a @ m1 + a @ a


def global_standard_error(e: Povm, target, window: np.ndarray | None = None) -> ErrorReport:
    """Supremum of the standard error over all states (or states in ``window``).

    ``(E[1] - A)^2 + N(E) = E[2] - E[1] A - A E[1] + A^2`` is PSD, so the supremum is
    its largest eigenvalue.
    """
    op = _error_operator(e, target)
    if window is not None:
        op = window.conj().T @ op @ window
    w, v = np.linalg.eigh((op + op.conj().T) / 2)
    wit = v[:, -1] if window is None else window @ v[:, -1]
    return ErrorReport("global_standard_error", math.sqrt(max(w[-1], 0.0)), "exact", wit,
                       {"windowed": window is not None})


# -- Wasserstein / Werner --------------------------------------------------------------


def _positions(p: Distribution) -> np.ndarray:
    return np.asarray(p.values, dtype=float)


def w1_distance(p: Distribution, q: Distribution, periodic: bool = False) -> float:
    """1-D Wasserstein-1 distance ``int |F_p - F_q| dx`` between cell masses.

    ``periodic=True`` uses the circle version ``min_c int |F_p - F_q - c| dx``,
    for distributions on a periodic grid.
    """
    x = _positions(p)
    if not np.array_equal(x, _positions(q)):
        raise ValueError("distributions live on different outcome sets")
    order = np.argsort(x, kind="stable")
    x = x[order]
    cdf = np.cumsum(p.weights[order] - q.weights[order])[:-1]
    gaps = np.diff(x)
    if periodic:
        g = p.outcomes
        if not isinstance(g, OutcomeGrid):
            raise ValueError("periodic W1 needs grid outcomes")
        # the closing gap wraps from the last point back to the first
        cdf = np.append(cdf, 0.0)
        gaps = np.append(gaps, g.length - (x[-1] - x[0]))
        c = _weighted_median(cdf, gaps)
        return float(np.abs(cdf - c) @ gaps)
    return float(np.abs(cdf) @ gaps)


def _weighted_median(v: np.ndarray, w: np.ndarray) -> float:
    order = np.argsort(v)
    cw = np.cumsum(w[order])
    return float(v[order][np.searchsorted(cw, cw[-1] / 2)])


def _shared_basis(e: Povm, f: Povm) -> bool:
    return (e.is_commuting and f.is_commuting and e.basis.shape == f.basis.shape
            and np.allclose(e.basis, f.basis, atol=1e-12))


def _convolution_kernel(sharp: Povm, smeared: Povm, tol: float = 1e-9) -> np.ndarray | None:
    """Kernel ``k`` with ``smeared = smear(k, sharp)`` (centered displacements), if any."""
    if not (_shared_basis(sharp, smeared) and sharp.is_sharp() and sharp.grid is not None):
        return None
    n = sharp.grid.n_points
    ws = sharp.weights
    if not np.allclose(ws, np.eye(n), atol=tol):
        return None
    k = smeared.weights[:, n // 2]
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :] + n // 2) % n
    if np.abs(k[idx] - smeared.weights).max() > tol:
        return None
    return k


def werner_distance(e: Povm, f: Povm, search_budget: int = 32, seed: int = 0,
                    periodic: bool = True, max_iter: int = 50) -> ErrorReport:
    """Supremum over pure states of the W1 distance between the two outcome distributions.

    * ``f`` a convolution of sharp ``e`` (or vice versa): mean absolute displacement of
      the kernel, attained at point masses; certificate ``exact``.
    * common eigenbasis: the distributions are mixtures of eigenvector distributions and
      W1 is jointly convex, so the eigenvector sweep is exact.
    * otherwise: eigenvector sweep plus seeded sign/eigenvector ascent; ``lower-bound``.
    """
    if e.dim != f.dim or len(e) != len(f):
        raise ValueError("werner_distance needs observables on the same space and outcomes")
    if isinstance(e.outcomes, OutcomeGrid) != isinstance(f.outcomes, OutcomeGrid) or (
            not np.array_equal(e.values, f.values)):
        raise ValueError("grid mismatch")
    periodic = periodic and e.grid is not None
    for sharp, smeared in ((e, f), (f, e)):
        k = _convolution_kernel(sharp, smeared)
        if k is not None:
            d = sharp.grid.cell_offsets()
            if periodic:
                d = np.minimum(np.abs(d), sharp.grid.length - np.abs(d))
            return ErrorReport("werner_distance", float(np.abs(d) @ k), "exact", None,
                               {"method": "convolution"})

    def w1_of(psi):
        t = np.outer(psi, psi.conj())
        return w1_distance(probability_distribution(e, t), probability_distribution(f, t), periodic)

    if _shared_basis(e, f):
        vals = [w1_distance(Distribution(e.outcomes, e.weights[:, k]),
                            Distribution(f.outcomes, f.weights[:, k]), periodic)
                for k in range(e.dim)]
        k = int(np.argmax(vals))
        return ErrorReport("werner_distance", vals[k], "exact", e.basis[:, k],
                           {"method": "eigenbasis"})

    best, wit = -1.0, None
    for psi in np.eye(e.dim, dtype=complex):
        v = w1_of(psi)
        if v > best:
            best, wit = v, psi
    x = np.sort(e.values)
    gaps = np.diff(x)
    order = np.argsort(e.values, kind="stable")
    diff = e.effects[order] - f.effects[order]
    cum = np.cumsum(diff, axis=0)[:-1]                       # A_k, k = 0..n-2
    if periodic:
        cum = np.concatenate([cum, np.zeros_like(cum[:1])])
        gaps = np.append(gaps, e.grid.length - (x[-1] - x[0]))
    rng = np.random.default_rng(seed)
    for _ in range(search_budget):
        psi = rng.normal(size=e.dim) + 1j * rng.normal(size=e.dim)
        psi /= np.linalg.norm(psi)
        prev = -np.inf
        for _ in range(max_iter):
            cdf = np.einsum("a,kab,b->k", psi.conj(), cum, psi).real
            if periodic:
                s = np.where(cdf > _weighted_median(cdf, gaps), 1.0, -1.0)
            else:
                s = np.sign(cdf)
            h = np.tensordot(s * gaps, cum, axes=1)
            w, v = np.linalg.eigh((h + h.conj().T) / 2)
            psi = v[:, -1]
            val = w1_of(psi)
            if val <= prev + 1e-12:
                break
            prev = val
        if prev > best:
            best, wit = prev, psi
    return ErrorReport("werner_distance", best, "lower-bound", wit,
                       {"method": "ascent", "starts": search_budget})


# -- calibration inaccuracy and error bars -------------------------------------------------


def _odd_cells(width: float, spacing: float) -> int:
    k = max(int(round(width / spacing)), 1)
    return k if k % 2 == 1 else k + 1


def _window_cells(n: int, center: int, k: int) -> np.ndarray:
    return (center + np.arange(k) - k // 2) % n


def _target_columns(target: Povm) -> list[np.ndarray]:
    """Eigenvector columns of ``target`` owned by each outcome cell."""
    return [np.flatnonzero(target.weights[i] > 0.5) for i in range(len(target))]


def _mass_fn(m1: Povm, target: Povm):
    """Return ``f(cells_delta, cells_w) -> min eigenvalue of the compressed M1(J_w)``."""
    cols = _target_columns(target)
    if _shared_basis(m1, target):
        w = m1.weights

        def fn(cd, cw):
            idx = np.concatenate([cols[i] for i in cd])
            return float(w[cw][:, idx].sum(axis=0).min())
        return fn
    if m1.is_commuting:
        # rotate M1's eigenbasis into the target basis once
        u = target.basis.conj().T @ m1.basis

        def fn(cd, cw):
            idx = np.concatenate([cols[i] for i in cd])
            s = m1.weights[cw].sum(axis=0)
            c = (u[idx] * s) @ u[idx].conj().T
            return float(np.linalg.eigvalsh(c)[0])
        return fn
    vb = target.basis

    def fn(cd, cw):
        idx = np.concatenate([cols[i] for i in cd])
        a = m1.effects[cw].sum(axis=0)
        c = vb[:, idx].conj().T @ a @ vb[:, idx]
        return float(np.linalg.eigvalsh((c + c.conj().T) / 2)[0])
    return fn


def inaccuracy_delta(m1: Povm, target: Povm, delta: float, eps1: float,
                     covariant: bool = False, centers=None) -> ErrorReport:
    """Smallest width ``w`` such that inputs sharply inside ``J_{q;delta}`` land in ``J_{q;w}``
    with probability at least ``1 - eps1``, for every center ``q``.

    Widths are odd numbers of cells.  The worst input for a given center is the lowest
    eigenvector of ``M1(J_{q;w})`` compressed to the range of ``target(J_{q;delta})``.
    If the required width exceeds half the grid, the answer is :data:`NO_FINITE_WIDTH`.
    """
    g = target.grid
    if g is None or m1.grid is None or len(m1) != len(target):
        raise ValueError("inaccuracy_delta needs grid observables with the same outcomes")
    if not 0 < eps1 < 0.5:
        raise ValueError("eps1 must lie in (0, 1/2)")
    if not target.is_commuting or not target.is_sharp():
        raise ValueError("target must be a sharp grid observable")
    n, dx = g.n_points, g.spacing
    kd = _odd_cells(delta, dx)
    kmax = n // 2 if (n // 2) % 2 == 1 else n // 2 - 1
    if centers is None:
        centers = [n // 2] if covariant else range(n)
    fn = _mass_fn(m1, target)

    def ok(kw):
        return all(fn(_window_cells(n, c, kd), _window_cells(n, c, kw)) >= 1 - eps1 - 1e-12
                   for c in centers)

    if not ok(kmax):
        return ErrorReport("inaccuracy_delta", NO_FINITE_WIDTH, "exact", None,
                           {"delta": kd * dx, "eps1": eps1})
    lo, hi = (kd - 1) // 2, (kmax - 1) // 2          # half-widths; answer in (lo, hi]
    if ok(2 * lo + 1):
        hi = lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(2 * mid + 1):
            hi = mid
        else:
            lo = mid
    return ErrorReport("inaccuracy_delta", (2 * hi + 1) * dx, "exact", None,
                       {"delta": kd * dx, "eps1": eps1})


def error_bar_width(m1: Povm, target: Povm, eps1: float, covariant: bool = False,
                    ladder: int = 3) -> ErrorReport:
    """Error-bar width: the inaccuracy in the limit of sharply localized inputs.

    ``inaccuracy_delta`` is evaluated for ``2**k - 1`` cells, ``k = ladder..1``; the
    one-cell value is returned and the ladder is kept in ``details``.
    """
    g = target.grid
    steps = {}
    last = None
    for k in range(ladder, 0, -1):
        cells = 2**k - 1
        last = inaccuracy_delta(m1, target, cells * g.spacing, eps1, covariant)
        steps[f"delta_cells_{cells}"] = last.value
    return ErrorReport("error_bar_width", last.value, "exact", None,
                       {"eps1": eps1, **steps})


def finite_error_bars(m1: Povm, target: Povm, eps_list=(0.05, 0.1, 0.2),
                      covariant: bool = False) -> bool:
    return all(error_bar_width(m1, target, e, covariant, ladder=1).finite for e in eps_list)


def preparation_ur_check(t: np.ndarray, g: OutcomeGrid, hbar: float | None = None,
                         slack: float = 0.499) -> tuple[float, bool]:
    """``Delta Q * Delta P`` from the grid distributions and whether it exceeds ``slack * hbar``."""
    hbar = config.HBAR if hbar is None else hbar
    _, _, sq = distribution_stats(probability_distribution(position_pvm(g), t))
    _, _, sp = distribution_stats(probability_distribution(momentum_pvm(g, hbar), t))
    prod = sq * sp
    return prod, bool(prod >= slack * hbar)
