import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from measlimits.hilbert import OutcomeGrid, random_state, random_unitary
from measlimits.instruments import (DiagonalOperation, Instrument, Operation, RankOneOperation,
                                    choi_matrix, gen_luders_compatibility, induced_povm,
                                    is_ideal, is_repeatable, luders_compatibility,
                                    luders_instrument, nondisturbance_is_trivial,
                                    ozawa_instrument, scalar_instrument, spanning_states,
                                    state_preparing_instrument, vn_discrete_instrument,
                                    vn_position_instrument)
from measlimits.observables import Povm, position_pvm, probability_distribution, random_povm


def _dense_equivalent(op):
    return Operation(op.dense_kraus())


def test_operation_layouts_agree(rng):
    d = 4
    t = random_state(d, rng)
    b = random_state(d, rng)
    diag = DiagonalOperation(rng.normal(size=(2, d)) + 1j * rng.normal(size=(2, d)))
    r1 = RankOneOperation(rng.normal(size=(3, d)) + 0j, rng.normal(size=(3, d)) + 1j)
    for op in (diag, r1):
        ref = _dense_equivalent(op)
        assert np.allclose(op.apply(t), ref.apply(t))
        assert np.allclose(op.dual(b), ref.dual(b))
        assert np.allclose(op.effect(), ref.effect())


def test_dual_is_adjoint(rng):
    op = Operation(rng.normal(size=(2, 3, 3)) + 1j * rng.normal(size=(2, 3, 3)))
    t, b = random_state(3, rng), random_state(3, rng)
    assert np.trace(op.apply(t) @ b) == pytest.approx(np.trace(t @ op.dual(b)))


def test_instrument_must_be_trace_preserving():
    with pytest.raises(ValueError):
        Instrument([0], [DiagonalOperation(np.array([0.5, 1.0]))])


def test_choi_positive_for_luders(rng):
    instr = luders_instrument(random_povm(3, 3, rng))
    for op in instr.ops:
        c = choi_matrix(op)
        assert np.linalg.eigvalsh(c)[0] > -1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 5), st.integers(2, 4), st.integers(0, 2**31))
def test_luders_coherence(d, k, seed):
    rng = np.random.default_rng(seed)
    e = random_povm(d, k, rng)
    instr = luders_instrument(e)
    t = random_state(d, rng)
    tr = [np.trace(op.apply(t)).real for op in instr.ops]
    assert np.allclose(tr, probability_distribution(e, t).weights, atol=1e-10)
    assert np.allclose(induced_povm(instr).effects, e.effects, atol=1e-9)
    out = instr.total(t)
    assert np.trace(out).real == pytest.approx(1.0)
    assert np.linalg.eigvalsh(out)[0] > -1e-10


def test_luders_sharp_is_ideal_and_repeatable(rng):
    u = random_unitary(4, rng)
    a = Povm.commuting([0, 1], u, np.array([[1, 1, 0, 0], [0, 0, 1, 1.0]]))
    lu = luders_instrument(a)
    assert is_repeatable(lu)
    assert is_ideal(lu)


def test_degenerate_von_neumann_repeatable_not_ideal():
    vn = vn_discrete_instrument(np.diag([1.0, 1.0, 2.0]))
    assert vn.outcomes == [1.0, 2.0]
    assert is_repeatable(vn)
    res = is_ideal(vn)
    assert not res
    # the witness is certain for its outcome yet gets changed
    psi = res.witness
    assert abs(psi[2]) < 1e-12
    t = np.outer(psi, psi.conj())
    assert np.abs(vn.ops[0].apply(t) - t).max() > 1e-3


def test_nondegenerate_von_neumann_is_ideal():
    assert is_ideal(vn_discrete_instrument(np.diag([1.0, 2.0, 3.0])))


def test_vn_eigenbasis_must_diagonalize():
    with pytest.raises(ValueError):
        vn_discrete_instrument(np.diag([1.0, 2.0]), np.array([[1, 1], [1, -1]]) / np.sqrt(2))


def test_unsharp_luders_not_repeatable_but_approximately():
    e = Povm.commuting([0, 1], np.eye(2), np.array([[0.9, 0.1], [0.1, 0.9]]))
    lu = luders_instrument(e)
    assert not is_repeatable(lu)
    # per eigenvector the repeat probability is w^2 against (1 - eps) w, for w = 0.9 and 0.1
    assert not is_repeatable(lu, eps=0.5)
    assert is_repeatable(lu, eps=0.9)
    assert is_repeatable(lu, eps=0.5).margin == pytest.approx(0.01 - 0.5 * 0.1)


def test_approximate_ideality_lp():
    e = Povm.commuting([0, 1], np.eye(2), np.array([[0.9, 0.1], [0.1, 0.9]]))
    assert is_ideal(luders_instrument(e), eps=0.2)


def test_ozawa_instrument_sharp_and_prepares(rng):
    g = OutcomeGrid(16, 4.0)
    t0 = np.zeros((16, 16), complex)
    t0[8, 8] = 1
    instr = ozawa_instrument(g, t0)
    assert np.allclose(induced_povm(instr).weights, position_pvm(g).weights)
    t = random_state(16, rng)
    out = instr.ops[3].apply(t)
    expected = np.zeros((16, 16))
    expected[3, 3] = t[3, 3].real
    assert np.allclose(out, expected)
    assert is_repeatable(instr)


def test_vn_position_instrument_effects():
    g = OutcomeGrid(32, 8.0)
    chi = np.exp(-g.points**2 / 2).astype(complex)
    chi /= np.linalg.norm(chi)
    instr = vn_position_instrument(g, 1.0, chi)
    e = induced_povm(instr)
    assert e.is_commuting
    assert np.allclose(e.weights.sum(axis=0), 1)
    with pytest.raises(ValueError):
        vn_position_instrument(g, 1.0, 2 * chi)


def test_state_preparing_instrument(rng):
    e = random_povm(3, 2, rng)
    s = [random_state(3, rng) for _ in range(2)]
    instr = state_preparing_instrument(e, s)
    t = random_state(3, rng)
    for i in range(2):
        p = np.trace(t @ e.effect(i)).real
        assert np.allclose(instr.ops[i].apply(t), p * s[i])


def test_scalar_instrument_nondisturbing_and_trivial():
    v = nondisturbance_is_trivial(scalar_instrument(3, [0.25, 0.75]))
    assert v.nondisturbing and v.trivial
    assert np.allclose(v.constants, [0.25, 0.75], atol=1e-9)


def test_luders_instrument_disturbs(rng):
    u = random_unitary(3, rng)
    v = nondisturbance_is_trivial(luders_instrument(Povm.commuting([0, 1, 2], u, np.eye(3))))
    assert not v.nondisturbing
    assert v.deviation >= 0.5
    t = np.outer(v.witness, v.witness.conj())
    assert v.deviation == pytest.approx(np.abs(np.linalg.eigvalsh(
        luders_instrument(Povm.commuting([0, 1, 2], u, np.eye(3))).total(t) - t)).sum())


def test_spanning_states_span_operator_space():
    states = spanning_states(4, n_random=0)
    m = np.array([np.outer(s, s.conj()).ravel() for s in states])
    assert np.linalg.matrix_rank(m) == 16


def test_luders_theorem_pairs(rng):
    for i in range(50):
        u = random_unitary(4, rng)
        a = Povm.commuting([0, 1], u, np.array([[1, 1, 0, 0], [0, 0, 1, 1.0]]))
        h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        h = h + h.conj().T
        if i % 2:
            h = sum(a.effect(k) @ h @ a.effect(k) for k in range(2))
        v = luders_compatibility(a, h)
        assert v.equivalent
        assert v.cond_b == bool(i % 2)


def test_generalized_luders_two_outcome(rng):
    for i in range(20):
        u = random_unitary(3, rng)
        lam = rng.uniform(0, 1, 3)
        e = Povm.commuting([0, 1], u, np.stack([lam, 1 - lam]))
        b = (u * rng.normal(size=3)) @ u.conj().T if i % 2 else np.diag(rng.normal(size=3)) + 0j
        v = gen_luders_compatibility(e, b)
        assert v.equivalent
    with pytest.raises(ValueError):
        gen_luders_compatibility(random_povm(2, 3, rng), np.eye(2))
    with pytest.raises(ValueError):
        luders_compatibility(Povm.commuting([0, 1], np.eye(2), np.full((2, 2), 0.5)), np.eye(2))
