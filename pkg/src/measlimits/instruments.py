"""Quantum operations and instruments in Kraus form.

Three Kraus layouts are supported because grid instruments are large:
dense ``(r, d, d)`` stacks, diagonal Kraus operators ``(r, d)`` and sums of
rank-one terms ``|a_s><b_s|``.  All of them expose the same ``apply`` /
``dual`` pair, so predicates never care which layout they receive.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.optimize import linprog

from . import config
from .hilbert import OutcomeGrid, psd_sqrt, trace_norm
from .observables import Povm, cells_in_interval, is_trivial, trivial_constants


class Operation:
    """Completely positive map ``T -> sum_k K_k T K_k^dagger`` (dense Kraus stack)."""

    def __init__(self, kraus):
        kraus = np.asarray(kraus, dtype=complex)
        if kraus.ndim == 2:
            kraus = kraus[None]
        self.kraus = kraus
        self.dim = kraus.shape[-1]

    def apply(self, t: np.ndarray) -> np.ndarray:
        k = self.kraus
        return (k @ t @ k.conj().swapaxes(-1, -2)).sum(axis=0)

    def dual(self, b: np.ndarray) -> np.ndarray:
        k = self.kraus
        return (k.conj().swapaxes(-1, -2) @ b @ k).sum(axis=0)

    def effect(self) -> np.ndarray:
        k = self.kraus
        return (k.conj().swapaxes(-1, -2) @ k).sum(axis=0)

    def dense_kraus(self) -> np.ndarray:
        return self.kraus

    def is_diagonal(self) -> bool:
        return False


class DiagonalOperation(Operation):
    """Kraus operators that are diagonal in the computational basis; ``diags`` has shape (r, d)."""

    def __init__(self, diags):
        diags = np.asarray(diags, dtype=complex)
        if diags.ndim == 1:
            diags = diags[None]
        self.diags = diags
        self.dim = diags.shape[-1]

    @property
    def kraus(self) -> np.ndarray:
        return np.stack([np.diag(k) for k in self.diags])

    def gram(self) -> np.ndarray:
        """``sum_k conj(k) k^T``: the apply/dual maps are Hadamard products with it."""
        return np.einsum("ka,kb->ab", self.diags.conj(), self.diags)

    def apply(self, t):
        return np.asarray(t) * (self.diags.T @ self.diags.conj())

    def dual(self, b):
        return np.asarray(b) * self.gram()

    def effect(self):
        return np.diag((np.abs(self.diags) ** 2).sum(axis=0)).astype(complex)

    def dense_kraus(self):
        return self.kraus

    def is_diagonal(self) -> bool:
        return True


class RankOneOperation(Operation):
    """Kraus operators ``|a_s><b_s|``; ``a`` and ``b`` have shape (r, d)."""

    def __init__(self, a, b):
        self.a = np.atleast_2d(np.asarray(a, dtype=complex))
        self.b = np.atleast_2d(np.asarray(b, dtype=complex))
        self.dim = self.a.shape[-1]

    @property
    def kraus(self) -> np.ndarray:
        return np.einsum("sa,sb->sab", self.a, self.b.conj())

    def apply(self, t):
        w = ((self.b.conj() @ t) * self.b).sum(axis=1)
        return (self.a.T * w) @ self.a.conj()

    def dual(self, x):
        w = ((self.a.conj() @ x) * self.a).sum(axis=1)
        return (self.b.T * w) @ self.b.conj()

    def effect(self):
        w = np.einsum("sa,sa->s", self.a.conj(), self.a).real
        return (self.b.T * w) @ self.b.conj()

    def dense_kraus(self):
        return self.kraus


def apply(op: Operation, t: np.ndarray) -> tuple[np.ndarray, float]:
    """Unnormalized output state and its trace (the outcome probability)."""
    t = np.asarray(t)
    if t.shape != (op.dim, op.dim):
        raise ValueError(f"state of shape {t.shape} does not match operation dim {op.dim}")
    out = op.apply(t)
    return out, float(np.trace(out).real)


def choi_matrix(op: Operation) -> np.ndarray:
    """Choi matrix ``sum_ij |i><j| (x) op(|i><j|)``; PSD iff ``op`` is completely positive."""
    k = op.dense_kraus()
    d = op.dim
    return np.einsum("kai,kbj->iajb", k, k.conj()).reshape(d * d, d * d)


class Instrument:
    """Outcome-indexed family of operations whose sum is trace preserving."""

    def __init__(self, outcomes, ops: Sequence[Operation], validate: bool = True,
                 tol: float = config.NORM_TOL):
        self.outcomes = outcomes if isinstance(outcomes, OutcomeGrid) else list(outcomes)
        self.ops = list(ops)
        n = outcomes.n_points if isinstance(outcomes, OutcomeGrid) else len(self.outcomes)
        if len(self.ops) != n:
            raise ValueError(f"{len(self.ops)} operations for {n} outcomes")
        self.dim = self.ops[0].dim
        if validate:
            total = sum(op.effect() for op in self.ops)
            if np.abs(total - np.eye(self.dim)).max() > tol:
                raise ValueError("instrument is not trace preserving in total")

    def __len__(self) -> int:
        return len(self.ops)

    def __repr__(self) -> str:
        return f"Instrument({len(self)} outcomes, dim={self.dim})"

    @property
    def grid(self) -> OutcomeGrid | None:
        return self.outcomes if isinstance(self.outcomes, OutcomeGrid) else None

    def total(self, t: np.ndarray) -> np.ndarray:
        """Nonselective map ``I_Omega(T)``."""
        return sum(op.apply(t) for op in self.ops)

    def total_dual(self, b: np.ndarray) -> np.ndarray:
        """Heisenberg-picture nonselective map ``I_Omega^*(B)``."""
        if all(op.is_diagonal() for op in self.ops):
            return np.asarray(b) * self.diagonal_gram()
        return sum(op.dual(b) for op in self.ops)

    def diagonal_gram(self) -> np.ndarray:
        return sum(op.gram() for op in self.ops)

    def apply_set(self, cells, t: np.ndarray) -> np.ndarray:
        return sum(self.ops[i].apply(t) for i in cells)

    def effects(self) -> np.ndarray:
        return np.stack([op.effect() for op in self.ops])


def induced_povm(instr: Instrument) -> Povm:
    """POVM with ``E_X = sum_k K_k^dagger K_k``; stored in commuting form when diagonal."""
    eff = instr.effects()
    d = instr.dim
    off = eff.copy()
    off[:, np.arange(d), np.arange(d)] = 0
    if np.abs(off).max() <= 1e-14:
        w = eff[:, np.arange(d), np.arange(d)].real
        return Povm.commuting(instr.outcomes, np.eye(d), w)
    return Povm(instr.outcomes, eff)


# -- named instruments ------------------------------------------------------------------


def luders_instrument(e: Povm) -> Instrument:
    """Generalized Lüders instrument ``T -> E_i^(1/2) T E_i^(1/2)``."""
    if e.is_commuting and np.allclose(e.basis, np.eye(e.dim)):
        ops = [DiagonalOperation(np.sqrt(np.clip(w, 0, None))) for w in e.weights]
    elif e.is_commuting:
        v = e.basis
        ops = [Operation((v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T) for w in e.weights]
    else:
        ops = [Operation(psd_sqrt(x)) for x in e.effects]
    return Instrument(e.outcomes, ops)


def vn_discrete_instrument(a: np.ndarray, eigenbasis: np.ndarray | None = None,
                           tol: float = 1e-8) -> Instrument:
    """Von Neumann instrument ``T -> sum_l |phi_kl><phi_kl| T |phi_kl><phi_kl|``.

    ``eigenbasis`` (columns) selects the orthonormal basis inside degenerate
    eigenspaces; it must diagonalize ``a``.
    """
    from .observables import _group_eigenvalues

    a = np.asarray(a, dtype=complex)
    if eigenbasis is None:
        w, v = np.linalg.eigh(a)
    else:
        v = np.asarray(eigenbasis, dtype=complex)
        m = v.conj().T @ a @ v
        if np.abs(m - np.diag(np.diag(m))).max() > tol * max(1.0, np.abs(a).max()):
            raise ValueError("eigenbasis does not diagonalize the operator")
        w = np.diag(m).real
        order = np.argsort(w, kind="stable")
        w, v = w[order], v[:, order]
    groups = _group_eigenvalues(w, tol)
    outcomes = [float(np.mean(w[g])) for g in groups]
    ops = [RankOneOperation(v[:, g].T, v[:, g].T) for g in groups]
    return Instrument(outcomes, ops)


def vn_position_instrument(g: OutcomeGrid, lam: float, probe: np.ndarray,
                           tol: float = config.ATOL) -> Instrument:
    """Instrument of the impulsive position coupling with a pure probe.

    ``probe`` is the probe wavefunction sampled on the apparatus grid
    ``g.scaled(lam)``, so the Kraus operator for outcome cell ``q`` is
    ``diag_j probe(lam (q - x_j))`` exactly (periodic).
    """
    probe = np.asarray(probe, dtype=complex)
    if abs(np.linalg.norm(probe) - 1) > tol:
        raise ValueError("probe must be normalized")
    if g.offset != 0:
        raise ValueError("vn_position_instrument needs a grid with a point at the origin")
    n = g.n_points
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :] + n // 2) % n
    diags = probe[idx]
    return Instrument(g, [DiagonalOperation(diags[m]) for m in range(n)])


def translated_probe_vectors(g: OutcomeGrid, probe_state: np.ndarray, tol: float = 1e-13):
    """Eigen-decomposition of a probe state as (weights, vectors) with negligible ranks dropped."""
    w, v = np.linalg.eigh((probe_state + probe_state.conj().T) / 2)
    keep = w > tol
    return w[keep], v[:, keep].T


def ozawa_instrument(g: OutcomeGrid, probe_state: np.ndarray) -> Instrument:
    """``I_q(T) = <q|T|q> * (probe translated by q)``: sharp position, state preparation afterwards."""
    if g.offset != 0:
        raise ValueError("ozawa_instrument needs a grid with a point at the origin")
    n = g.n_points
    w, vecs = translated_probe_vectors(g, np.asarray(probe_state, dtype=complex))
    ops = []
    for m in range(n):
        shift = m - n // 2
        a = np.sqrt(w)[:, None] * np.roll(vecs, shift, axis=1)
        b = np.zeros_like(a)
        b[:, m] = 1
        ops.append(RankOneOperation(a, b))
    return Instrument(g, ops)


def state_preparing_instrument(first: Povm, prepared: Sequence[np.ndarray]) -> Instrument:
    """``I_i(T) = tr(T E_i) S_i`` for a POVM with rank-one-decomposable effects."""
    ops = []
    for i, s in enumerate(prepared):
        ew, ev = np.linalg.eigh(first.effect(i))
        sw, sv = np.linalg.eigh(s)
        a, b = [], []
        for (x, u), (y, t) in itertools.product(zip(ew, ev.T), zip(sw, sv.T)):
            if x > 1e-14 and y > 1e-14:
                a.append(np.sqrt(x * y) * t)
                b.append(u)
        ops.append(RankOneOperation(np.array(a), np.array(b)))
    return Instrument(first.outcomes, ops)


def scalar_instrument(d: int, constants: Sequence[float], labels=None) -> Instrument:
    """``I_X(T) = lambda_X T``: nondisturbing, with trivial POVM ``lambda_X 1``."""
    constants = np.asarray(constants, dtype=float)
    labels = list(range(len(constants))) if labels is None else labels
    return Instrument(labels, [DiagonalOperation(np.full(d, np.sqrt(c))) for c in constants])


# -- predicates ---------------------------------------------------------------------------


@dataclass
class PredicateResult:
    verdict: bool
    margin: float
    witness: Any = None
    details: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.verdict

    def to_record(self, name: str, params: dict | None = None) -> dict:
        rec = {"name": name, "params": params or {}, "verdict": bool(self.verdict),
               "margin": float(self.margin)}
        if self.witness is not None:
            w = np.asarray(self.witness)
            rec["witness"] = {"re": w.real.round(12).tolist(), "im": w.imag.round(12).tolist()}
        return rec


def spanning_states(d: int, rng: np.random.Generator | None = None, n_random: int = 50,
                    full_limit: int = 16) -> list[np.ndarray]:
    """Pure probe states: basis vectors, pair superpositions and seeded random vectors.

    For ``d <= full_limit`` every pair ``(|j> + |k>)``, ``(|j> + i|k>)`` is used so the
    projectors span all operators; above that only adjacent pairs are taken.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    eye = np.eye(d, dtype=complex)
    states = [eye[k] for k in range(d)]
    pairs = itertools.combinations(range(d), 2) if d <= full_limit else zip(range(d - 1), range(1, d))
    for j, k in pairs:
        states.append((eye[j] + eye[k]) / np.sqrt(2))
        states.append((eye[j] + 1j * eye[k]) / np.sqrt(2))
    for _ in range(n_random):
        v = rng.normal(size=d) + 1j * rng.normal(size=d)
        states.append(v / np.linalg.norm(v))
    return states


def _neighbourhood(instr: Instrument, i: int, d: float) -> np.ndarray:
    g = instr.grid
    if d > 0:
        if g is None:
            raise ValueError("d > 0 needs grid outcomes")
        return cells_in_interval(g, g.points[i], 2 * d)
    return np.array([i])


def is_repeatable(instr: Instrument, d: float = 0.0, eps: float = 0.0,
                  tol: float = config.NORM_TOL) -> PredicateResult:
    """Check ``tr I_{X_d}(I_X(T)) >= (1 - eps) tr I_X(T)`` for every cell ``X`` and state ``T``.

    For a fixed cell the inequality is linear in ``T``, so the worst state is the
    lowest eigenvector of ``I_X^*(E_{X_d}) - (1 - eps) E_X``; the check is exact.
    """
    effects = instr.effects()
    worst, witness, where = np.inf, None, None
    for i, op in enumerate(instr.ops):
        near = _neighbourhood(instr, i, d)
        m = op.dual(effects[near].sum(axis=0)) - (1 - eps) * effects[i]
        w, v = np.linalg.eigh((m + m.conj().T) / 2)
        if w[0] < worst:
            worst, witness, where = w[0], v[:, 0], i
    return PredicateResult(bool(worst >= -tol), float(worst), witness, {"outcome": where})


def _certain_subspace(e: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    w, v = np.linalg.eigh(e)
    return v[:, w >= 1 - tol]


def is_ideal(instr: Instrument, eps: float = 0.0, tol: float = config.NORM_TOL) -> PredicateResult:
    """Ideality (``eps = 0``) or approximate ideality (``eps > 0``) of a discrete instrument.

    ``eps = 0`` tests ``I_k(T) = T`` on a spanning set of states supported where
    outcome ``k`` is certain.  ``eps > 0`` tests that the outcome probability does not
    drop: if ``tr(T E_k) >= 1 - eps`` then ``tr(I_k(T) E_k) >= (1 - eps) tr(T E_k)``.
    The second condition is a linear program in the common eigenbasis when
    ``I_k^*(E_k)`` commutes with ``E_k``; otherwise it is sampled on probe states.
    """
    effects = instr.effects()
    if eps == 0:
        worst, witness = 0.0, None
        for k, op in enumerate(instr.ops):
            basis = _certain_subspace(effects[k])
            r = basis.shape[1]
            if r == 0:
                continue
            for c in spanning_states(r, n_random=5):
                psi = basis @ c
                t = np.outer(psi, psi.conj())
                dev = trace_norm(op.apply(t) - t)
                if dev > worst:
                    worst, witness = dev, psi
        return PredicateResult(bool(worst <= tol), -worst, witness if worst > tol else None)

    worst, witness = np.inf, None
    for k, op in enumerate(instr.ops):
        e = effects[k]
        a = op.dual(e)
        if np.abs(a @ e - e @ a).max() <= 1e-10:
            w, v = np.linalg.eigh(e + 0.5772 * a)
            ek = np.einsum("ai,ab,bi->i", v.conj(), e, v).real
            ak = np.einsum("ai,ab,bi->i", v.conj(), a, v).real
            res = linprog(ak - (1 - eps) * ek, A_ub=[-ek], b_ub=[-(1 - eps)],
                          A_eq=[np.ones_like(ek)], b_eq=[1], bounds=(0, None), method="highs")
            if res.status == 2:
                continue  # no state reaches confidence 1 - eps for this outcome
            if res.fun < worst:
                worst, witness = res.fun, v @ np.sqrt(np.clip(res.x, 0, None))
        else:
            for psi in spanning_states(instr.dim):
                t = np.outer(psi, psi.conj())
                p = np.trace(t @ e).real
                if p >= 1 - eps:
                    val = np.trace(op.apply(t) @ e).real - (1 - eps) * p
                    if val < worst:
                        worst, witness = val, psi
    if not np.isfinite(worst):
        worst = 0.0
    return PredicateResult(bool(worst >= -tol), float(worst), witness)


@dataclass
class NondisturbanceVerdict:
    nondisturbing: bool
    trivial: bool | None
    constants: np.ndarray | None
    witness: np.ndarray | None
    deviation: float

    def to_record(self, name: str, params: dict | None = None) -> dict:
        rec = {"name": name, "params": params or {}, "verdict": self.nondisturbing,
               "margin": -float(self.deviation), "trivial": self.trivial}
        if self.constants is not None:
            rec["constants"] = [round(float(c), 12) for c in self.constants]
        return rec


def nondisturbance_is_trivial(instr: Instrument, tol: float = 1e-9) -> NondisturbanceVerdict:
    """No state change implies a trivial induced observable.

    Scans a spanning set of states; if any has ``||I_Omega(T) - T||_1 > tol`` the
    instrument is disturbing and the most disturbed state is returned as witness.
    """
    worst, witness = 0.0, None
    for psi in spanning_states(instr.dim):
        t = np.outer(psi, psi.conj())
        dev = trace_norm(instr.total(t) - t)
        if dev > worst:
            worst, witness = dev, psi
    if worst > tol:
        return NondisturbanceVerdict(False, None, None, witness, worst)
    e = induced_povm(instr)
    triv = is_trivial(e, tol)
    return NondisturbanceVerdict(True, triv, trivial_constants(e) if triv else None, None, worst)


@dataclass
class CompatibilityVerdict:
    cond_a: bool
    cond_b: bool
    residual_a: float
    residual_b: float

    @property
    def equivalent(self) -> bool:
        return self.cond_a == self.cond_b

    def to_record(self, name: str, params: dict | None = None) -> dict:
        return {"name": name, "params": params or {}, "verdict": self.equivalent,
                "margin": 0.0, "a": self.cond_a, "b": self.cond_b,
                "residual_a": self.residual_a, "residual_b": self.residual_b}


def luders_compatibility(a_pvm: Povm, b: np.ndarray, tol: float = 1e-9) -> CompatibilityVerdict:
    """Lüders theorem: ``sum_k P_k B P_k = B`` versus ``[P_k, B] = 0``, computed independently."""
    if not a_pvm.is_sharp():
        raise ValueError("luders_compatibility needs a sharp first observable")
    ps = [a_pvm.effect(i) for i in range(len(a_pvm))]
    ra = float(np.linalg.norm(sum(p @ b @ p for p in ps) - b, 2))
    rb = float(max(np.linalg.norm(p @ b - b @ p, 2) for p in ps))
    return CompatibilityVerdict(ra <= tol, rb <= tol, ra, rb)


def gen_luders_compatibility(e: Povm, b: np.ndarray, tol: float = 1e-9) -> CompatibilityVerdict:
    """Two-outcome case of the generalized Lüders theorem."""
    if len(e) != 2:
        raise ValueError("gen_luders_compatibility handles two-outcome observables only")
    es = [e.effect(i) for i in range(2)]
    roots = [psd_sqrt(x) for x in es]
    ra = float(np.linalg.norm(sum(r @ b @ r for r in roots) - b, 2))
    rb = float(max(np.linalg.norm(x @ b - b @ x, 2) for x in es))
    return CompatibilityVerdict(ra <= tol, rb <= tol, ra, rb)
