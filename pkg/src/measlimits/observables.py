"""POVMs over grids or discrete label sets.

A :class:`Povm` stores either a dense stack of effects or, for observables
whose effects commute, a shared eigenbasis plus a table of eigenvalue
weights (``E_i = V diag(W[i]) V^dagger``).  Position, momentum and their
smeared versions all use the commuting form, which keeps grid observables
at ``n = 256`` within a few megabytes.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from . import config
from .hilbert import OutcomeGrid, eig_hermitian, is_hermitian


def _values_of(outcomes) -> np.ndarray | None:
    if isinstance(outcomes, OutcomeGrid):
        return outcomes.points
    try:
        return np.asarray(outcomes, dtype=float)
    except (TypeError, ValueError):
        return None


class Povm:
    """Normalized positive-operator-valued measure with finitely many outcomes."""

    def __init__(self, outcomes, effects=None, *, basis=None, weights=None,
                 validate: bool = True, tol: float = config.NORM_TOL):
        self.outcomes = outcomes if isinstance(outcomes, OutcomeGrid) else list(outcomes)
        if (effects is None) == (basis is None):
            raise ValueError("give either effects or basis+weights")
        if effects is not None:
            effects = np.asarray(effects, dtype=complex)
            if effects.ndim != 3 or effects.shape[1] != effects.shape[2]:
                raise ValueError("effects must have shape (n_outcomes, d, d)")
            self._effects = effects
            self.basis = None
            self.weights = None
            self.dim = effects.shape[1]
        else:
            self.basis = np.asarray(basis, dtype=complex)
            self.weights = np.asarray(weights, dtype=float)
            self.dim = self.basis.shape[0]
            if self.weights.shape[1] != self.dim:
                raise ValueError("weights must have shape (n_outcomes, d)")
        if len(self) != len(self.outcomes):
            raise ValueError(f"{len(self)} effects for {len(self.outcomes)} outcomes")
        if validate:
            self.validate(tol)

    # -- construction helpers ---------------------------------------------------
    @classmethod
    def commuting(cls, outcomes, basis, weights, **kw) -> "Povm":
        return cls(outcomes, basis=basis, weights=weights, **kw)

    def __len__(self) -> int:
        return self._effects.shape[0] if self.basis is None else self.weights.shape[0]

    def __repr__(self) -> str:
        kind = "commuting" if self.is_commuting else "dense"
        return f"Povm({len(self)} outcomes, dim={self.dim}, {kind})"

    @property
    def is_commuting(self) -> bool:
        return self.basis is not None

    @property
    def grid(self) -> OutcomeGrid | None:
        return self.outcomes if isinstance(self.outcomes, OutcomeGrid) else None

    @property
    def values(self) -> np.ndarray:
        v = _values_of(self.outcomes)
        if v is None:
            raise ValueError("outcomes are not numeric")
        return v

    @cached_property
    def effects(self) -> np.ndarray:
        if self.basis is None:
            return self._effects
        v = self.basis
        return np.einsum("ak,ik,bk->iab", v, self.weights, v.conj())

    def effect(self, i: int) -> np.ndarray:
        if self.basis is None:
            return self._effects[i]
        return (self.basis * self.weights[i]) @ self.basis.conj().T

    def combine(self, weights: np.ndarray) -> np.ndarray:
        """``sum_i weights[i] * E_i``."""
        weights = np.asarray(weights)
        if self.basis is None:
            return np.tensordot(weights, self._effects, axes=1)
        return (self.basis * (weights @ self.weights)) @ self.basis.conj().T

    def validate(self, tol: float = config.NORM_TOL) -> None:
        if self.basis is not None:
            v = self.basis
            if np.abs(v.conj().T @ v - np.eye(self.dim)).max() > tol:
                raise ValueError("POVM basis is not unitary")
            if self.weights.min() < -tol or self.weights.max() > 1 + tol:
                raise ValueError("POVM weights outside [0, 1]")
            if np.abs(self.weights.sum(axis=0) - 1).max() > tol:
                raise ValueError("POVM effects do not sum to identity")
            return
        total = self._effects.sum(axis=0)
        if np.abs(total - np.eye(self.dim)).max() > tol:
            raise ValueError("POVM effects do not sum to identity")
        for e in self._effects:
            if not is_hermitian(e, tol):
                raise ValueError("POVM effect is not Hermitian")
            w = np.linalg.eigvalsh(e)
            if w[0] < -tol or w[-1] > 1 + tol:
                raise ValueError("POVM effect spectrum outside [0, 1]")

    def is_sharp(self, tol: float = 1e-9) -> bool:
        if self.basis is not None:
            w = self.weights
            return bool(np.abs(w * (1 - w)).max() <= tol)
        return all(np.abs(e @ e - e).max() <= tol for e in self._effects)


@dataclass(frozen=True)
class Distribution:
    """Probability weights over the outcomes of a :class:`Povm`."""

    outcomes: object
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        n = self.outcomes.n_points if isinstance(self.outcomes, OutcomeGrid) else len(self.outcomes)
        if w.shape != (n,):
            raise ValueError("weights do not match outcomes")

    @property
    def values(self) -> np.ndarray:
        v = _values_of(self.outcomes)
        if v is None:
            raise ValueError("outcomes are not numeric")
        return v

    def total(self) -> float:
        return float(self.weights.sum())

    def mean(self) -> float:
        return float(self.weights @ self.values)

    def var(self) -> float:
        return float(self.weights @ (self.values - self.mean()) ** 2)

    def density(self) -> np.ndarray:
        """Weights divided by the cell width (grid outcomes only)."""
        return self.weights / self.outcomes.spacing

    def to_csv(self, path) -> None:
        labels = self.values if _values_of(self.outcomes) is not None else self.outcomes
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["outcome", "weight"])
            for x, p in zip(labels, self.weights):
                w.writerow([f"{x:.12g}" if isinstance(x, (float, np.floating)) else x, f"{p:.12g}"])


# -- sharp observables -------------------------------------------------------------


def _group_eigenvalues(w: np.ndarray, tol: float) -> list[list[int]]:
    groups = [[0]]
    for k in range(1, len(w)):
        if abs(w[k] - w[groups[-1][0]]) <= tol * max(1.0, abs(w[k])):
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


def pvm_from_hermitian(a: np.ndarray, outcomes=None, labels: Sequence | None = None,
                       tol: float = 1e-8) -> Povm:
    """Spectral measure of a Hermitian matrix.

    With a grid, eigenvalues are binned into cells.  Otherwise the outcomes are
    the distinct eigenvalues in ascending order, optionally renamed by ``labels``.
    """
    w, v = eig_hermitian(a)
    d = len(w)
    if isinstance(outcomes, OutcomeGrid):
        weights = np.zeros((outcomes.n_points, d))
        for k, x in enumerate(w):
            weights[outcomes.index_of(x), k] = 1.0
        return Povm.commuting(outcomes, v, weights)
    groups = _group_eigenvalues(w, tol)
    if outcomes is None:
        outcomes = [float(np.mean(w[g])) for g in groups] if labels is None else list(labels)
    if len(outcomes) != len(groups):
        raise ValueError(f"{len(groups)} distinct eigenvalues for {len(outcomes)} outcomes")
    weights = np.zeros((len(groups), d))
    for i, g in enumerate(groups):
        weights[i, g] = 1.0
    return Povm.commuting(outcomes, v, weights)


def position_pvm(g: OutcomeGrid) -> Povm:
    return Povm.commuting(g, np.eye(g.n_points), np.eye(g.n_points))


def momentum_pvm(g: OutcomeGrid, hbar: float | None = None) -> Povm:
    """Sharp momentum on the conjugate grid; effects are plane-wave projectors."""
    f = g.fourier_matrix(hbar)
    return Povm.commuting(g.momentum_grid(hbar), f.conj().T, np.eye(g.n_points))


def probability_distribution(e: Povm, t: np.ndarray) -> Distribution:
    t = np.asarray(t)
    if t.shape != (e.dim, e.dim):
        raise ValueError(f"state of shape {t.shape} does not match POVM dim {e.dim}")
    if e.is_commuting:
        diag = np.einsum("ak,ab,bk->k", e.basis.conj(), t, e.basis).real
        w = e.weights @ diag
    else:
        w = np.einsum("iab,ba->i", e.effects, t).real
    return Distribution(e.outcomes, w)


# -- smearing ------------------------------------------------------------------------


def _same_grid(a: OutcomeGrid, b: OutcomeGrid) -> bool:
    return a.n_points == b.n_points and np.isclose(a.spacing, b.spacing, rtol=1e-12)


def kernel_matrix(kernel: Distribution) -> np.ndarray:
    """Circulant ``C[j, k] = kernel(j - k)`` with displacements in centered order."""
    g = kernel.outcomes
    n = g.n_points
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :] + n // 2) % n
    return kernel.weights[idx]


def smear(kernel: Distribution, sharp: Povm) -> Povm:
    """Periodic convolution of a sharp grid observable with a displacement kernel.

    ``kernel`` holds the cell masses of ``outcome - true value``; the effect for
    cell ``j`` is ``sum_k kernel(j - k) sharp_k``.
    """
    g = sharp.grid
    if g is None or not isinstance(kernel.outcomes, OutcomeGrid) or not _same_grid(kernel.outcomes, g):
        raise ValueError("kernel and observable must live on the same grid")
    if not sharp.is_commuting:
        raise ValueError("smear requires a commuting (grid) observable")
    return Povm.commuting(g, sharp.basis, kernel_matrix(kernel) @ sharp.weights)


def convolve_kernels(k1: Distribution, k2: Distribution) -> Distribution:
    if not _same_grid(k1.outcomes, k2.outcomes):
        raise ValueError("kernel grid mismatch")
    return Distribution(k1.outcomes, kernel_matrix(k1) @ k2.weights)


def point_kernel(g: OutcomeGrid) -> Distribution:
    w = np.zeros(g.n_points)
    w[g.n_points // 2] = 1
    return Distribution(g, w)


def kernel_from_density(g: OutcomeGrid, density) -> Distribution:
    """Cell masses proportional to ``density(d)`` at the grid displacements, normalized."""
    w = np.asarray(density(g.cell_offsets()), dtype=float)
    if w.min() < 0 or w.sum() <= 0:
        raise ValueError("kernel density must be nonnegative and not identically zero")
    return Distribution(g, w / w.sum())


def gaussian_kernel(g: OutcomeGrid, sigma: float, mean: float = 0.0) -> Distribution:
    return kernel_from_density(g, lambda d: np.exp(-((d - mean) ** 2) / (2 * sigma**2)))


def uniform_kernel(g: OutcomeGrid, width: float) -> Distribution:
    """Equal mass on the cells with ``|d| <= width / 2``."""
    return kernel_from_density(g, lambda d: (np.abs(d) <= width / 2 + 1e-9 * g.spacing).astype(float))


# -- moments and noise ---------------------------------------------------------------


def moment_operator(e: Povm, k: int) -> np.ndarray:
    """``E[k] = sum_j x_j^k E_j``."""
    if k < 0:
        raise ValueError("moment order must be nonnegative")
    return e.combine(e.values ** k)


def noise_operator(e: Povm) -> np.ndarray:
    m1 = moment_operator(e, 1)
    return moment_operator(e, 2) - m1 @ m1


def max_expectation(a: np.ndarray, window: np.ndarray | None = None) -> float:
    """Largest value of ``tr(T a)`` over states supported in ``window`` (all states if None)."""
    if window is not None:
        a = window.conj().T @ a @ window
    return float(np.linalg.eigvalsh((a + a.conj().T) / 2)[-1])


def intrinsic_noise(e: Povm, window: np.ndarray | None = None) -> float:
    return max(max_expectation(noise_operator(e), window), 0.0)


# -- structural predicates -------------------------------------------------------------


def is_trivial(e: Povm, tol: float = 1e-9) -> bool:
    """True iff every effect is within ``tol`` of a multiple of the identity."""
    eye = np.eye(e.dim)
    for i in range(len(e)):
        a = e.effect(i)
        lam = np.trace(a).real / e.dim
        if np.linalg.norm(a - lam * eye, 2) > tol:
            return False
    return True


def trivial_constants(e: Povm) -> np.ndarray:
    return np.array([np.trace(e.effect(i)).real / e.dim for i in range(len(e))])


def mub_pair(n: int) -> tuple[Povm, Povm]:
    """Computational basis and discrete-Fourier basis PVMs in dimension ``n``."""
    if n < 2:
        raise ValueError("mutually unbiased pair needs n >= 2")
    j = np.arange(n)
    fourier = np.exp(2j * np.pi * np.outer(j, j) / n) / np.sqrt(n)
    labels = list(range(n))
    return (Povm.commuting(labels, np.eye(n), np.eye(n)),
            Povm.commuting(labels, fourier, np.eye(n)))


def is_projection(p: np.ndarray, tol: float = 1e-9) -> bool:
    return is_hermitian(p, tol) and np.abs(p @ p - p).max() <= tol


def complementarity_overlap(p1: np.ndarray, p2: np.ndarray, tol: float = 1e-9) -> float:
    """``||p1 p2||``: the largest cosine of the principal angles between the ranges.

    A value below one certifies that the ranges intersect trivially.
    """
    if not (is_projection(p1, tol) and is_projection(p2, tol)):
        raise ValueError("complementarity_overlap needs orthogonal projections")
    return float(np.linalg.norm(p1 @ p2, 2))


def cells_in_interval(g: OutcomeGrid, center: float, width: float) -> np.ndarray:
    """Indices of cells whose points lie within periodic distance ``width/2`` of ``center``."""
    d = (g.points - center + g.length / 2) % g.length - g.length / 2
    return np.flatnonzero(np.abs(d) <= width / 2 + 1e-9 * g.spacing)


def interval_effect(e: Povm, cells) -> np.ndarray:
    w = np.zeros(len(e))
    w[np.asarray(cells, dtype=int)] = 1
    return e.combine(w)


def random_povm(d: int, k: int, rng: np.random.Generator, labels=None) -> Povm:
    """``E_i = S^(-1/2) G_i S^(-1/2)`` with ``G_i`` random PSD and ``S = sum G_i``."""
    g = rng.normal(size=(k, d, d)) + 1j * rng.normal(size=(k, d, d))
    g = g @ g.conj().transpose(0, 2, 1)
    w, v = np.linalg.eigh(g.sum(axis=0))
    s = (v / np.sqrt(w)) @ v.conj().T
    eff = s @ g @ s
    eff = (eff + eff.conj().transpose(0, 2, 1)) / 2
    return Povm(list(range(k)) if labels is None else labels, eff)
