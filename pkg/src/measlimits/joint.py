"""Sequential joint observables and the joint-measurement uncertainty verifiers.

A sequential joint observable runs an instrument ``I`` and then measures a
second observable ``F``: ``tr(T G_ij) = tr(I_i(T) F_j)``.  Its marginals are
``M1 = induced_povm(I)`` and ``M2_j = I_Omega^*(F_j)``.  Effects are never
stored as an ``(n, n, d, d)`` array for grid observables; probabilities and
marginals are evaluated through the instrument.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from . import config
from .errors import (error_bar_width, global_standard_error, interior_window,
                     werner_distance)
from .hilbert import OutcomeGrid, function_of_momentum
from .instruments import (Instrument, induced_povm, luders_instrument,
                          ozawa_instrument, vn_position_instrument)
from .observables import (Distribution, Povm, intrinsic_noise, is_trivial, momentum_pvm,
                          mub_pair, position_pvm, probability_distribution, smear,
                          trivial_constants)
from .probes import Probe

WERNER_C_REFERENCE = 0.304745


class JointObservable:
    """Double-indexed family of effects ``G_ij`` summing to the identity.

    Give either explicit ``effects`` of shape ``(n1, n2, d, d)`` or a ``first``
    instrument and a ``second`` observable (sequential form).
    """

    def __init__(self, outcomes1=None, outcomes2=None, effects=None, *, first: Instrument | None = None,
                 second: Povm | None = None, targets: tuple[Povm, Povm] | None = None,
                 tol: float = config.NORM_TOL):
        if (effects is None) == (first is None):
            raise ValueError("give either explicit effects or a first instrument")
        self.targets = targets
        if effects is not None:
            effects = np.asarray(effects, dtype=complex)
            if effects.ndim != 4 or effects.shape[2] != effects.shape[3]:
                raise ValueError("effects must have shape (n1, n2, d, d)")
            d = effects.shape[2]
            if np.abs(effects.sum(axis=(0, 1)) - np.eye(d)).max() > tol:
                raise ValueError("joint effects do not sum to the identity")
            for e in effects.reshape(-1, d, d):
                if np.abs(e - e.conj().T).max() > tol or np.linalg.eigvalsh(e)[0] < -tol:
                    raise ValueError("joint effect is not positive")
            self._effects = effects
            self.first = self.second = None
            self.outcomes1 = outcomes1 if outcomes1 is not None else list(range(effects.shape[0]))
            self.outcomes2 = outcomes2 if outcomes2 is not None else list(range(effects.shape[1]))
            self.dim = d
        else:
            if first.dim != second.dim:
                raise ValueError("instrument and second observable act on different spaces")
            self._effects = None
            self.first, self.second = first, second
            self.outcomes1, self.outcomes2 = first.outcomes, second.outcomes
            self.dim = first.dim

    @property
    def shape(self) -> tuple[int, int]:
        if self._effects is not None:
            return self._effects.shape[:2]
        return len(self.first), len(self.second)

    def probabilities(self, t: np.ndarray) -> np.ndarray:
        """Joint outcome probabilities ``p[i, j]``."""
        t = np.asarray(t)
        if self._effects is not None:
            return np.einsum("ijab,ba->ij", self._effects, t).real
        return np.stack([probability_distribution(self.second, op.apply(t)).weights
                         for op in self.first.ops])

    @cached_property
    def marginal1(self) -> Povm:
        if self._effects is not None:
            return Povm(self.outcomes1, self._effects.sum(axis=1))
        return induced_povm(self.first)

    @cached_property
    def marginal2(self) -> Povm:
        if self._effects is not None:
            return Povm(self.outcomes2, self._effects.sum(axis=0))
        return heisenberg_povm(self.first, self.second)


def heisenberg_povm(instr: Instrument, f: Povm, tol: float = 1e-10) -> Povm:
    """``Y -> I_Omega^*(F(Y))``; kept in ``f``'s eigenbasis when it stays diagonal there."""
    if all(op.is_diagonal() for op in instr.ops) and f.is_commuting:
        c = instr.diagonal_gram()
        b = f.basis
        # image of the eigenprojector b_k b_k^dagger, written in f's eigenbasis
        cols = np.empty((f.dim, f.dim))
        diagonal = True
        for k in range(f.dim):
            vk = b.conj()[:, k][:, None] * b
            m = vk.conj().T @ (c @ vk)
            d = np.diag(m)
            if np.abs(m - np.diag(d)).max() > tol:
                diagonal = False
                break
            cols[:, k] = d.real
        if diagonal:
            return Povm.commuting(f.outcomes, b, f.weights @ cols.T)
    return Povm(f.outcomes, np.stack([instr.total_dual(f.effect(i)) for i in range(len(f))]))


def sequential_joint_observable(first: Instrument, second: Povm,
                                targets: tuple[Povm, Povm] | None = None) -> JointObservable:
    return JointObservable(first=first, second=second, targets=targets)


def marginals(m: JointObservable) -> tuple[Povm, Povm]:
    return m.marginal1, m.marginal2


# -- the position-momentum sequential family -----------------------------------------------


def position_kernel(g: OutcomeGrid, lam: float, probe_vec: np.ndarray) -> Distribution:
    """Displacement kernel of the impulsive position measurement: ``|phi(lam d)|^2``."""
    n = g.n_points
    d = np.arange(n) - n // 2
    return Distribution(g, np.abs(probe_vec[(d + n // 2) % n]) ** 2)


def momentum_kernel(g: OutcomeGrid, lam: float, probe_vec: np.ndarray,
                    hbar: float | None = None) -> Distribution:
    """Momentum displacement kernel ``|phi~(-p / lam)|^2`` from the probe's DFT."""
    n = g.n_points
    fa = g.scaled(lam).fourier_matrix(hbar)
    amp = np.abs(fa @ probe_vec) ** 2              # at apparatus momenta p / lam
    d = np.arange(n) - n // 2
    return Distribution(g.momentum_grid(hbar), amp[(-d + n // 2) % n])


def vn_qp_sequential(g: OutcomeGrid, lam: float, probe, hbar: float | None = None,
                     tol: float = 1e-6) -> JointObservable:
    """Impulsive position measurement followed by sharp momentum.

    The marginals are checked against ``smear(e, Q)`` and ``smear(f, P)`` with kernels
    built independently from the probe and its discrete Fourier transform.
    """
    probe_vec = probe.sample(g.scaled(lam)) if isinstance(probe, Probe) else np.asarray(probe, complex)
    if abs(np.linalg.norm(probe_vec) - 1) > 1e-9:
        raise ValueError("probe must be normalized")
    q, p = position_pvm(g), momentum_pvm(g, hbar)
    m = sequential_joint_observable(vn_position_instrument(g, lam, probe_vec), p, (q, p))
    m.kernels = (position_kernel(g, lam, probe_vec), momentum_kernel(g, lam, probe_vec, hbar))
    r1 = np.abs(m.marginal1.weights - smear(m.kernels[0], q).weights).max()
    m2 = m.marginal2
    if not m2.is_commuting:
        raise AssertionError("momentum marginal is not diagonal in the momentum basis")
    r2 = np.abs(m2.weights - smear(m.kernels[1], p).weights).max()
    if max(r1, r2) > tol:
        raise AssertionError(f"sequential marginals deviate from the smeared forms ({r1:.2e}, {r2:.2e})")
    m.residuals = (float(r1), float(r2))
    return m


def distorting_position_instrument(g: OutcomeGrid, t0: np.ndarray) -> Instrument:
    """Sharp position readout that leaves the system in ``t0`` translated to the outcome."""
    return ozawa_instrument(g, t0)


@dataclass
class MubVerdict:
    trivial: bool
    constants: np.ndarray
    deviation: float


def mub_sequential_trivial(n: int, second: Povm | None = None) -> MubVerdict:
    """Lüders measurement of the computational basis, then the Fourier basis.

    The effective second observable ``I_Omega^*(B_l)`` should be ``(1/n) 1``.
    """
    a, b = mub_pair(n)
    b = b if second is None else second
    eff = heisenberg_povm(luders_instrument(a), b)
    consts = trivial_constants(eff)
    dev = max(np.abs(eff.effect(i) - consts[i] * np.eye(n)).max() for i in range(len(eff)))
    return MubVerdict(is_trivial(eff, 1e-12), consts, float(dev))


# -- verifiers -----------------------------------------------------------------------------


@dataclass
class VerifierResult:
    family: str
    params: dict
    measure: str
    product: float
    bound: float
    passed: bool
    factors: tuple = ()
    note: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.product - self.bound

    def to_record(self) -> dict:
        prod = self.product if math.isfinite(self.product) else "inf"
        marg = self.margin if math.isfinite(self.margin) else "inf"
        return {"family": self.family, "params": self.params, "measure": self.measure,
                "product": prod, "bound": self.bound, "margin": marg, "pass": self.passed}


def _targets(m: JointObservable, targets):
    targets = targets if targets is not None else m.targets
    if targets is None:
        raise ValueError("the joint observable carries no target observables")
    return targets


def _windows(targets, guard_fraction: float):
    return tuple(interior_window(t, guard_fraction * t.grid.length) for t in targets)


def verify_appleby(m: JointObservable, targets=None, guard_fraction: float = 0.25,
                   slack: float = 0.02, family: str = "", params=None,
                   hbar: float | None = None) -> VerifierResult:
    """Global standard errors: ``eps(M1, Q) eps(M2, P) >= hbar/2``."""
    hbar = config.HBAR if hbar is None else hbar
    q, p = _targets(m, targets)
    wq, wp = _windows((q, p), guard_fraction)
    e1 = global_standard_error(m.marginal1, q, wq).value
    e2 = global_standard_error(m.marginal2, p, wp).value
    prod, bound = e1 * e2, hbar / 2
    return VerifierResult(family, params or {}, "standard_error", prod, bound,
                          prod >= bound * (1 - slack), (e1, e2))


def werner_constant(g: OutcomeGrid = OutcomeGrid(512, 40.0, 0.5), a: float = 1.0, b: float = 1.0,
                    hbar: float | None = None) -> float:
    """``E0^2 / (4 a b hbar)`` with ``E0`` the lowest eigenvalue of ``a|Q| + b|P|``."""
    return _werner_constant(g, float(a), float(b), float(config.HBAR if hbar is None else hbar))


@lru_cache(maxsize=8)
def _werner_constant(g: OutcomeGrid, a: float, b: float, hbar: float) -> float:
    h = a * np.diag(np.abs(g.points)) + b * function_of_momentum(g, np.abs, hbar)
    e0 = np.linalg.eigvalsh((h + h.conj().T) / 2)[0]
    return float(e0**2 / (4 * a * b * hbar))


def verify_werner(m: JointObservable, targets=None, constant: float | None = None,
                  family: str = "", params=None, hbar: float | None = None) -> VerifierResult:
    """Werner distances: ``d(M1, Q) d(M2, P) >= C hbar``."""
    hbar = config.HBAR if hbar is None else hbar
    q, p = _targets(m, targets)
    c = werner_constant() if constant is None else constant
    r1 = werner_distance(m.marginal1, q)
    r2 = werner_distance(m.marginal2, p)
    prod, bound = r1.value * r2.value, c * hbar
    note = "" if r1.certificate == r2.certificate == "exact" else "lower-bound distances"
    return VerifierResult(family, params or {}, "werner_distance", prod, bound, prod >= bound,
                          (r1.value, r2.value), note)


def error_bar_bound(eps1: float, eps2: float, hbar: float | None = None) -> float:
    hbar = config.HBAR if hbar is None else hbar
    return 2 * math.pi * max(1 - eps1 - eps2, 0.0) ** 2 * hbar


def verify_error_bars(m: JointObservable, eps1: float = 0.1, eps2: float = 0.1, targets=None,
                      slack: float = 0.05, family: str = "", params=None,
                      hbar: float | None = None) -> VerifierResult:
    """Error-bar widths: ``W1 W2 >= 2 pi (1 - eps1 - eps2)^2 hbar``; infinite widths pass."""
    q, p = _targets(m, targets)
    w1 = error_bar_width(m.marginal1, q, eps1).value
    w2 = error_bar_width(m.marginal2, p, eps2).value
    bound = error_bar_bound(eps1, eps2, hbar)
    prod = math.inf if not (math.isfinite(w1) and math.isfinite(w2)) else w1 * w2
    note = "infinite error bar" if math.isinf(prod) else ""
    return VerifierResult(family, params or {}, "error_bar_width", prod, bound,
                          prod >= bound * (1 - slack), (w1, w2), note,
                          {"eps1": eps1, "eps2": eps2})


def verify_noise(m: JointObservable, targets=None, guard_fraction: float = 0.25,
                 slack: float = 0.02, family: str = "", params=None,
                 hbar: float | None = None) -> VerifierResult:
    """Intrinsic noise: ``N(M1) N(M2) >= (hbar/2)^2``.

    The bound is checked in squared units; the comparison against ``hbar/2`` is kept in
    ``extra``.  A noiseless marginal is only admissible when its partner has no finite
    error bars, in which case the result is vacuous and passes with a note.
    """
    hbar = config.HBAR if hbar is None else hbar
    q, p = _targets(m, targets)
    wq, wp = _windows((q, p), guard_fraction)
    n1 = intrinsic_noise(m.marginal1, wq)
    n2 = intrinsic_noise(m.marginal2, wp)
    prod, bound = n1 * n2, (hbar / 2) ** 2
    extra = {"bound_linear": hbar / 2, "pass_linear": bool(prod >= hbar / 2)}
    if min(n1, n2) <= 1e-10:
        partner, target = (m.marginal2, p) if n1 <= n2 else (m.marginal1, q)
        if not error_bar_width(partner, target, 0.1).finite:
            return VerifierResult(family, params or {}, "noise", math.inf, bound, True, (n1, n2),
                                  "partner has no finite error bars", extra)
    return VerifierResult(family, params or {}, "noise", prod, bound,
                          prod >= bound * (1 - slack), (n1, n2), "", extra)


def verify_all(m: JointObservable, family: str = "", params=None, eps=(0.1, 0.1)) -> list[VerifierResult]:
    return [verify_appleby(m, family=family, params=params),
            verify_werner(m, family=family, params=params),
            verify_error_bars(m, *eps, family=family, params=params),
            verify_noise(m, family=family, params=params)]


def kernel_product(m: JointObservable) -> float:
    """``Delta(e) Delta(f)`` for a sequential family built by :func:`vn_qp_sequential`."""
    e, f = m.kernels
    return math.sqrt(max(e.var(), 0) * max(f.var(), 0))


__all__ = ["JointObservable", "VerifierResult", "WERNER_C_REFERENCE",
           "distorting_position_instrument", "error_bar_bound", "heisenberg_povm", "kernel_product",
           "marginals", "momentum_kernel", "mub_sequential_trivial", "position_kernel",
           "sequential_joint_observable", "verify_all", "verify_appleby", "verify_error_bars",
           "verify_noise", "verify_werner", "vn_qp_sequential", "werner_constant"]
