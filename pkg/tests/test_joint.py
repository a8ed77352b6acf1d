import math

import numpy as np
import pytest

from measlimits.hilbert import OutcomeGrid, random_state
from measlimits.instruments import luders_instrument
from measlimits.joint import (WERNER_C_REFERENCE, JointObservable, error_bar_bound,
                              kernel_product, marginals,
                              mub_sequential_trivial, sequential_joint_observable,
                              verify_appleby, verify_error_bars, verify_noise, verify_werner,
                              vn_qp_sequential, werner_constant)
from measlimits.observables import mub_pair, random_povm
from measlimits.probes import Probe


def test_explicit_joint_observable_validation(rng):
    e = random_povm(2, 4, rng)
    g = e.effects.reshape(2, 2, 2, 2)
    m = JointObservable(effects=g)
    assert m.shape == (2, 2)
    assert np.allclose(m.marginal1.effects, g.sum(axis=1))
    with pytest.raises(ValueError):
        JointObservable(effects=2 * g)
    with pytest.raises(ValueError):
        JointObservable()


def test_sequential_probabilities_and_marginals(rng):
    e, f = random_povm(3, 2, rng), random_povm(3, 3, rng)
    m = sequential_joint_observable(luders_instrument(e), f)
    t = random_state(3, rng)
    p = m.probabilities(t)
    assert p.sum() == pytest.approx(1.0)
    m1, m2 = marginals(m)
    assert np.allclose(p.sum(axis=1), [np.trace(t @ x).real for x in m1.effects])
    assert np.allclose(p.sum(axis=0), [np.trace(t @ x).real for x in m2.effects])


def test_heisenberg_povm_diagonal_and_dense_paths_agree():
    g = OutcomeGrid(16, 8.0)
    m = vn_qp_sequential(g, 1.0, Probe("gaussian", 1.0))
    fast = m.marginal2
    assert fast.is_commuting
    dense = np.stack([m.first.total_dual(m.second.effect(i)) for i in range(16)])
    assert np.allclose(fast.effects, dense, atol=1e-12)


def test_mub_sequential_trivial():
    for n in (2, 3, 5, 7):
        v = mub_sequential_trivial(n)
        assert v.trivial
        assert np.allclose(v.constants, 1 / n, atol=1e-12)
        assert v.deviation < 1e-12


def test_same_basis_sequential_is_not_trivial():
    a, _ = mub_pair(3)
    assert not mub_sequential_trivial(3, a).trivial


@pytest.mark.parametrize("width", [0.5, 1.0, 2.0])
def test_gaussian_family_fourier_relation(width):
    g = OutcomeGrid(256, 40.0)
    m = vn_qp_sequential(g, 1.0, Probe("gaussian", width))
    assert max(m.residuals) < 1e-10
    assert kernel_product(m) == pytest.approx(0.5, abs=1e-3)


def test_kernel_product_two_peak_exceeds_bound():
    m = vn_qp_sequential(OutcomeGrid(256, 40.0), 1.0, Probe("two-peak", 0.5, 3.0))
    assert kernel_product(m) > 0.499


def test_werner_constant_value():
    c = werner_constant()
    assert abs(c - WERNER_C_REFERENCE) <= 1e-3


def test_werner_constant_scales_with_hbar():
    g = OutcomeGrid(128, 20.0, 0.5)
    assert werner_constant(g, hbar=2.0) == pytest.approx(werner_constant(g, hbar=1.0), rel=1e-2)


def test_error_bar_bound_formula():
    assert error_bar_bound(0.1, 0.1, 1.0) == pytest.approx(2 * math.pi * 0.64)
    assert error_bar_bound(0.6, 0.6, 1.0) == 0.0


@pytest.fixture(scope="module")
def gaussian_family():
    return vn_qp_sequential(OutcomeGrid(256, 40.0), 1.0, Probe("gaussian", 1.0))


def test_verifiers_pass_on_gaussian(gaussian_family):
    m = gaussian_family
    a = verify_appleby(m)
    assert a.passed and a.product == pytest.approx(0.5, abs=1e-6)
    w = verify_werner(m)
    assert w.passed and w.factors[0] == pytest.approx(math.sqrt(2 / math.pi), abs=0.03)
    e = verify_error_bars(m)
    assert e.passed and math.isfinite(e.product)
    n = verify_noise(m)
    assert n.passed and n.product == pytest.approx(0.25, abs=1e-6)
    assert n.extra["pass_linear"] is False


def test_sharp_position_has_infinite_momentum_error_bars():
    g = OutcomeGrid(64, 10.0)
    from measlimits.joint import distorting_position_instrument
    from measlimits.observables import momentum_pvm, position_pvm
    t0 = np.exp(-g.points**2 / 0.36).astype(complex)
    t0 /= np.linalg.norm(t0)
    m = sequential_joint_observable(distorting_position_instrument(g, np.outer(t0, t0.conj())),
                                    momentum_pvm(g), (position_pvm(g), momentum_pvm(g)))
    r = verify_error_bars(m)
    assert math.isinf(r.factors[1]) and r.passed
    n = verify_noise(m)
    assert n.passed and n.note
