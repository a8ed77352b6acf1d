"""Measurement schemes: probe state, coupling unitary and pointer observable.

Couplings on grids are stored in structured form so that ``n = 256`` system
and apparatus grids (composite dimension 65536) never need a dense matrix:

* :class:`DenseCoupling` - explicit matrix, used for small systems;
* :class:`ControlledCoupling` - ``U = sum_j |j><j| (x) V_j`` (system position controls);
* :class:`ApparatusControlledCoupling` - ``U = sum_y W_y (x) |y><y|``;
* :class:`ProductCoupling` - ordered product of the above.

Every coupling acts on arrays of shape ``(sys_dim, app_dim, ...)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, eigsh

from . import config
from .hilbert import (OutcomeGrid, check_state, momentum_operator,
                      schmidt_entropy)
from .instruments import DiagonalOperation, Instrument, Operation
from .observables import Povm, position_pvm
from .probes import Probe


class Coupling:
    sys_dim: int
    app_dim: int

    def apply(self, psi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def apply_adjoint(self, psi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def power(self, t: float) -> "Coupling":
        """``exp(-i t H)`` for the coupling's Hermitian generator ``H``."""
        raise NotImplementedError

    def dense(self) -> np.ndarray:
        n, m = self.sys_dim, self.app_dim
        eye = np.eye(n * m, dtype=complex).reshape(n, m, n * m)
        return self.apply(eye).reshape(n * m, n * m)

    def unitarity_residual(self, n_vectors: int = 4, seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        shape = (self.sys_dim, self.app_dim, n_vectors)
        v = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        v /= np.linalg.norm(v.reshape(-1, n_vectors), axis=0)
        return float(max(np.abs(self.apply_adjoint(self.apply(v)) - v).max(),
                         np.abs(self.apply(self.apply_adjoint(v)) - v).max()))


class DenseCoupling(Coupling):
    def __init__(self, matrix, sys_dim: int, app_dim: int, generator=None):
        self.matrix = np.asarray(matrix, dtype=complex)
        self.sys_dim, self.app_dim = sys_dim, app_dim
        if self.matrix.shape != (sys_dim * app_dim,) * 2:
            raise ValueError("coupling matrix does not match dimensions")
        self._generator = None if generator is None else np.asarray(generator, dtype=complex)

    def _mul(self, mat, psi):
        n, m = self.sys_dim, self.app_dim
        flat = psi.reshape(n * m, -1)
        return (mat @ flat).reshape(psi.shape)

    def apply(self, psi):
        return self._mul(self.matrix, psi)

    def apply_adjoint(self, psi):
        return self._mul(self.matrix.conj().T, psi)

    def generator(self) -> np.ndarray:
        if self._generator is None:
            # U = Z exp(i theta) Z^dagger (Schur form of a normal matrix); H = -Z theta Z^dagger
            t, z = sla.schur(self.matrix, output="complex")
            theta = np.angle(np.diag(t))
            self._generator = -(z * theta) @ z.conj().T
        return self._generator

    def power(self, t):
        w, v = np.linalg.eigh(self.generator())
        return DenseCoupling((v * np.exp(-1j * t * w)) @ v.conj().T, self.sys_dim, self.app_dim,
                             t * self.generator())

    def dense(self):
        return self.matrix


class ControlledCoupling(Coupling):
    """``U = sum_j |j><j| (x) V_j`` with ``V_j = B_j diag(exp(-i theta_j)) B_j^dagger``.

    ``basis`` may be a single ``(m, m)`` unitary shared by all blocks or a
    ``(n, m, m)`` stack; ``phases`` has shape ``(n, m)``.
    """

    def __init__(self, basis, phases):
        self.basis = np.asarray(basis, dtype=complex)
        self.phases = np.asarray(phases, dtype=float)
        self.sys_dim, self.app_dim = self.phases.shape
        self.shared = self.basis.ndim == 2

    @classmethod
    def from_generators(cls, generators) -> "ControlledCoupling":
        w, v = np.linalg.eigh(np.asarray(generators))
        return cls(v, w)

    def blocks(self) -> np.ndarray:
        b = self.basis if not self.shared else np.broadcast_to(self.basis, (self.sys_dim,) + self.basis.shape)
        return np.einsum("jak,jk,jbk->jab", b, np.exp(-1j * self.phases), b.conj())

    def _act(self, psi, sign):
        extra = psi.shape[2:]
        flat = psi.reshape(self.sys_dim, self.app_dim, -1)
        ph = np.exp(sign * 1j * self.phases)[:, :, None]
        b = self.basis
        bh = b.conj().swapaxes(-1, -2)
        out = b @ (ph * (bh @ flat))
        return out.reshape((self.sys_dim, self.app_dim) + extra)

    def apply(self, psi):
        return self._act(psi, -1)

    def apply_adjoint(self, psi):
        return self._act(psi, +1)

    def outputs(self, chi: np.ndarray) -> np.ndarray:
        """``V_j chi`` for every control value ``j``; shape ``(n, m)``."""
        psi = np.broadcast_to(np.asarray(chi, dtype=complex), (self.sys_dim, self.app_dim))
        return self.apply(np.ascontiguousarray(psi))

    def power(self, t):
        return ControlledCoupling(self.basis, t * self.phases)


class ApparatusControlledCoupling(Coupling):
    """``U = sum_y W_y (x) |y><y|`` with ``W_y = B diag(exp(-i theta_y)) B^dagger``; phases ``(m, n)``."""

    def __init__(self, basis, phases):
        self.basis = np.asarray(basis, dtype=complex)
        self.phases = np.asarray(phases, dtype=float)
        self.app_dim, self.sys_dim = self.phases.shape

    def _act(self, psi, sign):
        extra = psi.shape[2:]
        flat = psi.reshape(self.sys_dim, self.app_dim, -1)
        b = self.basis
        ph = np.exp(sign * 1j * self.phases).T[:, :, None]
        n = self.sys_dim
        rot = (b.conj().T @ flat.reshape(n, -1)).reshape(flat.shape)
        out = (b @ (ph * rot).reshape(n, -1)).reshape(flat.shape)
        return out.reshape((self.sys_dim, self.app_dim) + extra)

    def apply(self, psi):
        return self._act(psi, -1)

    def apply_adjoint(self, psi):
        return self._act(psi, +1)

    def power(self, t):
        return ApparatusControlledCoupling(self.basis, t * self.phases)


class ProductCoupling(Coupling):
    """``U = factors[0] @ factors[1] @ ...``; the last factor acts first."""

    def __init__(self, factors):
        self.factors = list(factors)
        self.sys_dim, self.app_dim = self.factors[0].sys_dim, self.factors[0].app_dim

    def apply(self, psi):
        for f in reversed(self.factors):
            psi = f.apply(psi)
        return psi

    def apply_adjoint(self, psi):
        for f in self.factors:
            psi = f.apply_adjoint(psi)
        return psi

    def power(self, t):
        return DenseCoupling(self.dense(), self.sys_dim, self.app_dim).power(t)


# -- schemes ------------------------------------------------------------------------------


@dataclass
class MeasurementScheme:
    """Apparatus dimension, probe state, coupling unitary and pointer POVM."""

    sys_dim: int
    app_dim: int
    probe: np.ndarray
    coupling: Coupling
    pointer: Povm
    sys_grid: OutcomeGrid | None = None
    app_grid: OutcomeGrid | None = None

    def __post_init__(self):
        self.probe = check_state(self.probe, 1e-9)
        if self.probe.shape != (self.app_dim, self.app_dim):
            raise ValueError("probe state does not match apparatus dimension")
        if (self.coupling.sys_dim, self.coupling.app_dim) != (self.sys_dim, self.app_dim):
            raise ValueError("coupling does not match dimensions")
        if self.pointer.dim != self.app_dim:
            raise ValueError("pointer observable does not act on the apparatus")
        if self.coupling.unitarity_residual() > config.NORM_TOL:
            raise ValueError("coupling is not unitary")

    def probe_components(self, tol: float = 1e-13):
        w, v = np.linalg.eigh(self.probe)
        keep = w > tol
        return w[keep], v[:, keep].T

    def _pointer_frame(self):
        z = self.pointer
        if z.is_commuting:
            return z.basis, z.weights
        # diagonalize every pointer effect against one basis only if they commute
        raise ValueError("pointer observable must have commuting effects")


def measured_observable(m: MeasurementScheme) -> Povm:
    """POVM fixed by ``tr(U (T (x) T_A) U^dagger (1 (x) Z(X))) = tr(T E(X))``."""
    zb, zw = m._pointer_frame()
    probs, chis = m.probe_components()
    n = m.sys_dim
    if isinstance(m.coupling, ControlledCoupling):
        diag = np.zeros((len(m.pointer), n))
        for p, chi in zip(probs, chis):
            out = m.coupling.outputs(chi)                      # (n, m)
            amp = np.abs(out @ zb.conj()) ** 2                  # (n, k)
            diag += p * (zw @ amp.T)
        return Povm.commuting(m.pointer.outcomes, np.eye(n), diag)
    grams = np.zeros((m.app_dim, n, n), dtype=complex)
    for p, chi in zip(probs, chis):
        w = _isometry(m, chi)                                   # (n, m, n)
        wt = np.einsum("yk,xya->xka", zb.conj(), w)
        grams += p * np.einsum("xka,xkb->kab", wt.conj(), wt)
    eff = np.tensordot(zw, grams, axes=1)
    return _as_povm(m.pointer.outcomes, eff)


def _isometry(m: MeasurementScheme, chi: np.ndarray) -> np.ndarray:
    n = m.sys_dim
    psi = np.einsum("xa,y->xya", np.eye(n), chi)
    return m.coupling.apply(psi)


def _as_povm(outcomes, eff: np.ndarray) -> Povm:
    d = eff.shape[1]
    off = eff.copy()
    off[:, np.arange(d), np.arange(d)] = 0
    if np.abs(off).max() <= 1e-13:
        return Povm.commuting(outcomes, np.eye(d), eff[:, np.arange(d), np.arange(d)].real)
    return Povm(outcomes, (eff + eff.conj().transpose(0, 2, 1)) / 2)


def induced_instrument(m: MeasurementScheme, tol: float = 1e-14) -> Instrument:
    """Object instrument with the pointer-sandwich convention.

    ``I_X(T) = tr_A[(1 (x) Z(X)^(1/2)) U (T (x) T_A) U^dagger (1 (x) Z(X)^(1/2))]``; Kraus
    operators are ``sqrt(p_r z_s) (1 (x) <zeta_s|) U (. (x) chi_r)``.
    """
    zb, zw = m._pointer_frame()
    probs, chis = m.probe_components()
    controlled = isinstance(m.coupling, ControlledCoupling)
    pieces = []
    for p, chi in zip(probs, chis):
        if controlled:
            pieces.append(np.sqrt(p) * (m.coupling.outputs(chi) @ zb.conj()))        # (n, k)
        else:
            w = _isometry(m, chi)
            pieces.append(np.sqrt(p) * np.einsum("yk,xya->kxa", zb.conj(), w))       # (k, n, n)
    ops = []
    for x in range(len(m.pointer)):
        ks = np.flatnonzero(zw[x] > tol)
        sz = np.sqrt(zw[x, ks])
        if controlled:
            diags = np.concatenate([(pc[:, ks] * sz).T for pc in pieces])
            ops.append(DiagonalOperation(diags))
        else:
            kraus = np.concatenate([pc[ks] * sz[:, None, None] for pc in pieces])
            ops.append(Operation(kraus))
    return Instrument(m.pointer.outcomes, ops)


# -- couplings from the models --------------------------------------------------------------


def vn_coupling(g_sys: OutcomeGrid, g_app: OutcomeGrid, lam: float,
                hbar: float | None = None) -> ControlledCoupling:
    """``exp(-i lam Q (x) P_A / hbar)``: shifts the apparatus by ``lam * x``."""
    hbar = config.HBAR if hbar is None else hbar
    f = g_app.fourier_matrix(hbar)
    p = g_app.momentum_grid(hbar).points
    return ControlledCoupling(f.conj().T, lam * np.outer(g_sys.points, p) / hbar)


def ozawa_coupling(g_sys: OutcomeGrid, g_app: OutcomeGrid, hbar: float | None = None,
                   reverse: bool = False) -> ProductCoupling:
    """``exp(-i Q (x) P_A / hbar) exp(i P (x) Q_A / hbar)`` (product form).

    ``reverse=True`` swaps the factor order; it no longer measures sharp position.
    """
    hbar = config.HBAR if hbar is None else hbar
    shift_app = vn_coupling(g_sys, g_app, 1.0, hbar)
    f = g_sys.fourier_matrix(hbar)
    p = g_sys.momentum_grid(hbar).points
    shift_sys = ApparatusControlledCoupling(f.conj().T, -np.outer(g_app.points, p) / hbar)
    factors = [shift_app, shift_sys]
    return ProductCoupling(factors[::-1] if reverse else factors)


def momentum_conserving_coupling(g_sys: OutcomeGrid, g_app: OutcomeGrid, lam: float,
                                 hbar: float | None = None) -> ControlledCoupling:
    """``exp(-i (lam/2) [(Q - Q_A) P_A + P_A (Q - Q_A)] / hbar)``.

    The generator commutes with ``Q``, so for each system position ``x_j`` the
    apparatus evolves under a dilation about ``x_j``.
    """
    hbar = config.HBAR if hbar is None else hbar
    pa = momentum_operator(g_app, hbar)
    r = g_sys.points[:, None] - g_app.points[None, :]          # diagonal of x_j - Q_A
    gens = (0.5 * lam / hbar) * (r[:, :, None] * pa + pa * r[:, None, :])
    return ControlledCoupling.from_generators(gens)


def swap_coupling(d: int) -> DenseCoupling:
    s = np.zeros((d * d, d * d), dtype=complex)
    for a in range(d):
        for b in range(d):
            s[b * d + a, a * d + b] = 1
    gen = 0.5 * np.pi * (np.eye(d * d) - s)
    return DenseCoupling(s, d, d, gen)


def relabel(povm: Povm, outcomes) -> Povm:
    if povm.is_commuting:
        return Povm.commuting(outcomes, povm.basis, povm.weights, validate=False)
    return Povm(outcomes, povm.effects, validate=False)


def vn_scheme(g: OutcomeGrid, lam: float, probe: np.ndarray | Probe,
              hbar: float | None = None) -> MeasurementScheme:
    """Impulsive position measurement; the apparatus grid is ``g.scaled(lam)``.

    The pointer is the apparatus position read in units of ``1/lam``, so its
    outcomes coincide with the system grid.
    """
    g_app = g.scaled(lam)
    chi = probe.sample(g_app) if isinstance(probe, Probe) else np.asarray(probe, dtype=complex)
    return MeasurementScheme(g.n_points, g.n_points, np.outer(chi, chi.conj()),
                             vn_coupling(g, g_app, lam, hbar), relabel(position_pvm(g_app), g),
                             g, g_app)


def ozawa_scheme(g: OutcomeGrid, probe_state: np.ndarray, hbar: float | None = None,
                 reverse: bool = False) -> MeasurementScheme:
    return MeasurementScheme(g.n_points, g.n_points, probe_state,
                             ozawa_coupling(g, g, hbar, reverse), position_pvm(g), g, g)


def momentum_conserving_grid(g: OutcomeGrid, lam: float) -> OutcomeGrid:
    """Apparatus grid whose pointer reading, rescaled by ``1/(1 - e^-lam)``, lands on ``g``."""
    return g.scaled(1 - np.exp(-lam))


def momentum_conserving_scheme(g: OutcomeGrid, lam: float, probe: Probe,
                               hbar: float | None = None) -> MeasurementScheme:
    g_app = momentum_conserving_grid(g, lam)
    chi = probe.sample(g_app)
    return MeasurementScheme(g.n_points, g.n_points, np.outer(chi, chi.conj()),
                             momentum_conserving_coupling(g, g_app, lam, hbar),
                             relabel(position_pvm(g_app), g), g, g_app)


def swap_scheme(e: Povm, probe_vec: np.ndarray) -> MeasurementScheme:
    d = e.dim
    chi = np.asarray(probe_vec, dtype=complex)
    return MeasurementScheme(d, d, np.outer(chi, chi.conj()), swap_coupling(d), e)


# -- analyses --------------------------------------------------------------------------------


def oscillator_sector(g: OutcomeGrid, width: float, n_states: int,
                      hbar: float | None = None) -> np.ndarray:
    """Lowest ``n_states`` eigenvectors of ``(Q/width)^2 + (width P/hbar)^2``: a fixed
    phase-space region that finer grids resolve better."""
    hbar = config.HBAR if hbar is None else hbar
    p = momentum_operator(g, hbar) * width / hbar
    h = np.diag((g.points / width) ** 2) + p @ p
    return np.linalg.eigh(h)[1][:, :n_states]


def conserves_quantity(m: MeasurementScheme, l_sys: np.ndarray, l_app: np.ndarray,
                       sector: tuple[np.ndarray, np.ndarray] | None = None) -> float:
    """Relative commutator ``||[U, L (x) 1 + 1 (x) L_A]|| / (||U|| ||L_tot||)``.

    With ``sector = (B_sys, B_app)`` (orthonormal columns) both norms are taken over
    the product subspace only: ``||[U, L_tot] Pi|| / ||L_tot Pi||``.
    """
    n, k = m.sys_dim, m.app_dim
    u = m.coupling

    def lmul(psi):
        shape = psi.shape
        flat = psi.reshape(n, k, -1)
        out = (l_sys @ flat.reshape(n, -1)).reshape(flat.shape) + l_app @ flat
        return out.reshape(shape)

    def comm(psi):
        return u.apply(lmul(psi)) - lmul(u.apply(psi))

    if sector is not None:
        bs, ba = sector
        basis = np.einsum("ak,bl->abkl", bs, ba).reshape(n, k, -1)
        num = np.linalg.norm(comm(basis).reshape(n * k, -1), 2)
        den = np.linalg.norm(lmul(basis).reshape(n * k, -1), 2)
        return float(num / den)

    ws, wa = np.linalg.eigvalsh(l_sys), np.linalg.eigvalsh(l_app)
    l_norm = max(abs(ws[-1] + wa[-1]), abs(ws[0] + wa[0]))
    if l_norm == 0:
        return 0.0

    def comm_adj(psi):
        return lmul(u.apply_adjoint(psi)) - u.apply_adjoint(lmul(psi))

    if n * k <= 1024:
        c = comm(np.eye(n * k, dtype=complex).reshape(n, k, n * k)).reshape(n * k, n * k)
        return float(np.linalg.norm(c, 2) / l_norm)
    op = LinearOperator((n * k, n * k), dtype=complex,
                        matvec=lambda v: comm_adj(comm(v.reshape(n, k))).ravel())
    top = eigsh(op, k=1, which="LA", tol=1e-8, return_eigenvectors=False)[0]
    return float(np.sqrt(max(top, 0.0)) / l_norm)


def entanglement_profile(m: MeasurementScheme, psi: np.ndarray, steps: int = 20):
    """Entanglement entropy of ``exp(-i t H)(psi (x) chi)`` for ``t`` on a uniform grid in [0, 1]."""
    probs, chis = m.probe_components()
    if len(probs) != 1:
        raise ValueError("entanglement_profile needs a pure probe")
    start = np.einsum("x,y->xy", np.asarray(psi, dtype=complex), chis[0])
    out = []
    for t in np.linspace(0.0, 1.0, steps + 1):
        final = m.coupling.power(t).apply(start)
        final = final / np.linalg.norm(final)
        out.append((float(t), schmidt_entropy(final.ravel(), (m.sys_dim, m.app_dim), 1e-8)))
    return out


def scheme_from_povm(e: Povm, pointer_basis: np.ndarray | None = None) -> MeasurementScheme:
    """Scheme whose measured observable is ``e`` and whose instrument is generalized Lüders.

    The isometry ``phi (x) |0> -> sum_i (E_i^(1/2) phi) (x) |i>`` is completed to a unitary
    with an orthonormal basis of the complement of its range.
    """
    if e.grid is not None and len(e) > 64:
        raise ValueError("scheme_from_povm expects a small discrete observable")
    d, k = e.dim, len(e)
    roots = np.stack([_sqrt_effect(e, i) for i in range(k)])        # (k, d, d)
    v = np.einsum("iab->aib", roots).reshape(d * k, d)             # rows (a, i)
    if pointer_basis is not None:
        pb = np.asarray(pointer_basis, dtype=complex)
        v = np.einsum("ji,aib->ajb", pb, v.reshape(d, k, d)).reshape(d * k, d)
    comp = sla.null_space(v.conj().T)
    u = np.zeros((d * k, d * k), dtype=complex)
    cols = np.arange(d) * k
    u[:, cols] = v
    rest = np.setdiff1d(np.arange(d * k), cols)
    u[:, rest] = comp
    probe = np.zeros((k, k), dtype=complex)
    probe[0, 0] = 1
    pointer = (Povm.commuting(e.outcomes, np.eye(k), np.eye(k)) if pointer_basis is None
               else Povm.commuting(e.outcomes, np.asarray(pointer_basis), np.eye(k)))
    return MeasurementScheme(d, k, probe, DenseCoupling(u, d, k), pointer)


def _sqrt_effect(e: Povm, i: int) -> np.ndarray:
    if e.is_commuting:
        return (e.basis * np.sqrt(np.clip(e.weights[i], 0, None))) @ e.basis.conj().T
    from .hilbert import psd_sqrt
    return psd_sqrt(e.effect(i))


def wigner_spin_povm(eps: float) -> Povm:
    """Three-outcome spin-x observable ``{(1-eps) P_+, (1-eps) P_-, eps 1}``."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    plus = np.array([1, 1]) / np.sqrt(2)
    minus = np.array([1, -1]) / np.sqrt(2)
    basis = np.column_stack([plus, minus]).astype(complex)
    weights = np.array([[1 - eps, 0], [0, 1 - eps], [eps, eps]])
    return Povm.commuting(["+", "-", "?"], basis, weights)
