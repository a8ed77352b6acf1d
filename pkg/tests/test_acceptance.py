"""Acceptance criteria 1-9, each at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line (visible under ``pytest -v -s``
and in the captured log) before asserting.
"""
import math
import time

import numpy as np

from measlimits import joint
from measlimits.hilbert import (OutcomeGrid, momentum_operator, random_pure, random_state,
                                random_unitary)
from measlimits.instruments import (choi_matrix, induced_povm, is_ideal, is_repeatable,
                                    luders_compatibility, luders_instrument,
                                    nondisturbance_is_trivial, ozawa_instrument,
                                    scalar_instrument, vn_discrete_instrument)
from measlimits.joint import (distorting_position_instrument, kernel_product,
                              mub_sequential_trivial, verify_all, vn_qp_sequential)
from measlimits.observables import (Povm, cells_in_interval, complementarity_overlap,
                                    interval_effect, kernel_from_density, momentum_pvm,
                                    position_pvm, probability_distribution, random_povm, smear)
from measlimits.probes import Probe
from measlimits.schemes import (conserves_quantity, entanglement_profile, induced_instrument,
                                measured_observable, momentum_conserving_scheme,
                                oscillator_sector, ozawa_scheme, scheme_from_povm, swap_scheme,
                                vn_scheme)

# grid for the sequential position-momentum family: wide enough that sigma = 2 does not wrap
FAMILY_GRID = OutcomeGrid(256, 40.0)


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_criterion_1_werner_constant(capsys):
    g = OutcomeGrid(512, 40.0, 0.5)
    t0 = time.perf_counter()
    c = joint._werner_constant.__wrapped__(g, 1.0, 1.0, 1.0)
    elapsed = time.perf_counter() - t0
    err = abs(c - 0.304745)
    report(capsys, 1, err <= 1e-3 and elapsed <= 30,
           f"C={c:.7f} |C-0.304745|={err:.2e} runtime={elapsed:.2f}s")


def test_criterion_2_von_neumann_model(capsys):
    g = OutcomeGrid(256, 20.0)
    q = position_pvm(g)
    worst = 0.0
    for shape in ("gaussian", "uniform"):
        pr = Probe(shape, 1.0)
        for lam in (0.5, 1.0, 2.0):
            e = measured_observable(vn_scheme(g, lam, pr))
            # e(q) = lam |phi(-lam q)|^2; the probes are even
            ref = smear(kernel_from_density(g, lambda d: pr.density(-lam * d)), q)
            # effects are diagonal in the same basis, so the operator norm is the largest entry
            worst = max(worst, np.abs(e.weights - ref.weights).max())
    report(capsys, 2, worst <= 1e-8, f"max effect operator-norm deviation {worst:.2e}")


def test_criterion_3_ozawa_model(capsys):
    g = OutcomeGrid(256, 20.0)
    rng = np.random.default_rng(3)
    delta = 1.0
    inside = np.abs(g.points) <= delta
    v = np.where(inside, np.exp(-g.points**2), 0).astype(complex)
    v /= np.linalg.norm(v)
    w = inside.astype(complex) / math.sqrt(inside.sum())
    probes = [np.outer(v, v.conj()), 0.6 * np.outer(v, v.conj()) + 0.4 * np.outer(w, w.conj())]
    q = position_pvm(g)
    dev, margin = 0.0, np.inf
    for ta in probes:
        instr = ozawa_instrument(g, ta)
        for i in range(20):
            t = random_state(256, rng, 1 + i % 3)
            p = np.array([np.trace(op.apply(t)).real for op in instr.ops])
            dev = max(dev, np.abs(p - probability_distribution(q, t).weights).max())
        margin = min(margin, is_repeatable(instr, d=delta).margin)
    # the dilation itself on a small grid reproduces the same statistics
    gs = OutcomeGrid(32, 20.0 * 32 / 256)
    vs = np.where(np.abs(gs.points) <= delta, 1.0, 0).astype(complex)
    vs /= np.linalg.norm(vs)
    es = measured_observable(ozawa_scheme(gs, np.outer(vs, vs.conj())))
    scheme_dev = np.abs(es.effects - position_pvm(gs).effects).max()
    ok = dev <= 1e-8 and margin >= -1e-9 and scheme_dev <= 1e-8
    report(capsys, 3, ok, f"statistics deviation {dev:.2e}, delta-repeatability margin "
                          f"{margin:.2e}, scheme sharpness {scheme_dev:.2e}")


def test_criterion_4_no_information_without_disturbance(capsys):
    consts = [0.2, 0.3, 0.5]
    v = nondisturbance_is_trivial(scalar_instrument(4, consts))
    const_err = np.abs(v.constants - consts).max() if v.trivial else np.inf
    rng = np.random.default_rng(4)
    lu = nondisturbance_is_trivial(luders_instrument(
        Povm.commuting([0, 1, 2, 3], random_unitary(4, rng), np.eye(4))))
    g = OutcomeGrid(16, 4.0)
    t0 = np.zeros((16, 16), complex)
    t0[8, 8] = 1
    oz = nondisturbance_is_trivial(ozawa_instrument(g, t0))
    ok = (v.nondisturbing and v.trivial and const_err <= 1e-9
          and lu.deviation >= 0.5 and oz.deviation >= 0.5
          and lu.witness is not None and oz.witness is not None)
    report(capsys, 4, ok, f"constants error {const_err:.1e}; witness disturbance "
                          f"Luders {lu.deviation:.3f}, Ozawa {oz.deviation:.3f}")


def _continuum_e(pr, lam, q):
    s, sig = pr.separation / 2, pr.width
    if pr.shape == "gaussian":
        return lam * np.exp(-(lam * q) ** 2 / (2 * sig**2)) / (math.sqrt(2 * math.pi) * sig)
    z = 2 * math.sqrt(2 * math.pi) * sig * (1 + math.exp(-s**2 / (2 * sig**2)))
    return lam * pr.density(lam * q) / z


def _continuum_f(pr, lam, p, hbar=1.0):
    # f(p) = |phi~(-p / lam)|^2 / lam with phi~(k) = (2 pi hbar)^(-1/2) int phi exp(-ikx/hbar)
    k = -p / lam
    sig, s = pr.width, pr.separation / 2
    ghat2 = (2 * sig**2 / hbar) * np.exp(-2 * k**2 * sig**2 / hbar**2)
    if pr.shape == "gaussian":
        z = math.sqrt(2 * math.pi) * sig
        return ghat2 / z / lam
    z = 2 * math.sqrt(2 * math.pi) * sig * (1 + math.exp(-s**2 / (2 * sig**2)))
    return 4 * np.cos(k * s / hbar) ** 2 * ghat2 / z / lam


def test_criterion_5_sequential_fourier_relation(capsys):
    g = FAMILY_GRID
    n = g.n_points
    pg = g.momentum_grid()
    worst, prods, sat = 0.0, [], []
    for pr in (Probe("gaussian", 0.5), Probe("gaussian", 1.0), Probe("gaussian", 2.0),
               Probe("two-peak", 0.5, 3.0)):
        m = vn_qp_sequential(g, 1.0, pr)
        # outcome densities for an input sharply at x = 0 and at p = 0
        e_grid = m.marginal1.weights[:, n // 2] / g.spacing
        f_grid = m.marginal2.weights[:, n // 2] / pg.spacing
        worst = max(worst, np.abs(e_grid - _continuum_e(pr, 1.0, g.points)).max(),
                    np.abs(f_grid - _continuum_f(pr, 1.0, pg.points)).max())
        prods.append(kernel_product(m))
        if pr.shape == "gaussian":
            sat.append(abs(prods[-1] - 0.5))
    ok = worst <= 1e-6 and min(prods) >= 0.499 and max(sat) <= 1e-3
    report(capsys, 5, ok, f"pointwise density error {worst:.2e}; min product {min(prods):.6f}; "
                          f"Gaussian saturation error {max(sat):.2e}")


def test_criterion_6_four_uncertainty_verifiers(capsys):
    lines, ok = [], True
    for pr in (Probe("gaussian", 0.5), Probe("gaussian", 1.0), Probe("gaussian", 2.0),
               Probe("two-peak", 0.5, 3.0)):
        m = vn_qp_sequential(FAMILY_GRID, 1.0, pr)
        for r in verify_all(m):
            ok = ok and r.passed
            lines.append(f"{pr.shape}/{pr.width:g} {r.measure}: product {r.product:.6g} "
                         f"bound {r.bound:.6g} margin {r.margin:+.3e} pass={r.passed}")
            if r.measure == "noise":
                lines.append(f"    noise vs hbar/2 = {r.extra['bound_linear']:g}: "
                             f"pass={r.extra['pass_linear']} (units discrepancy)")
    with capsys.disabled():
        print("\n" + "\n".join(lines))
    report(capsys, 6, ok, "all verifiers over sigma in {0.5, 1, 2} and two-peak")


def test_criterion_7_complementarity(capsys):
    mub = [mub_sequential_trivial(n) for n in (2, 3, 5, 7)]
    mub_dev = max(max(v.deviation, np.abs(v.constants - 1 / len(v.constants)).max())
                  for v in mub)
    g = OutcomeGrid(256, 20.0)
    qx = interval_effect(position_pvm(g), cells_in_interval(g, 0.0, 2.0))
    py = interval_effect(momentum_pvm(g), cells_in_interval(g.momentum_grid(), 0.0, 2.0))
    overlap = complementarity_overlap(qx, py)
    t0v = np.exp(-g.points**2).astype(complex)
    t0v /= np.linalg.norm(t0v)
    t0 = np.outer(t0v, t0v.conj())
    instr = distorting_position_instrument(g, t0)
    p = momentum_pvm(g)
    ref = probability_distribution(p, t0).weights
    rng = np.random.default_rng(7)
    dist = max(np.abs(probability_distribution(p, instr.total(random_state(256, rng, 2))).weights
                      - ref).max() for _ in range(20))
    ok = mub_dev <= 1e-12 and overlap < 1 and dist <= 1e-9
    report(capsys, 7, ok, f"MUB deviation {mub_dev:.1e}; ||Q(X)P(Y)|| = {overlap:.6f}; "
                          f"distorted momentum deviation {dist:.1e}")


def test_criterion_8_conservation(capsys):
    lam = math.log(2)
    pr = Probe("gaussian", 1.0)
    c = math.exp(lam) - 1
    residuals = []
    kernel_err = None
    for n in (64, 128, 256):
        g = OutcomeGrid(n, 20.0)
        m = momentum_conserving_scheme(g, lam, pr)
        if n == 128:
            e = measured_observable(m)
            ref = smear(kernel_from_density(g, lambda d: pr.density(-c * d)), position_pvm(g))
            # interior columns: edge cells see the periodic wrap of the dilation
            inside = np.abs(g.points) <= g.length / 4
            kernel_err = np.abs(e.weights[:, inside] - ref.weights[:, inside]).max()
        sector = (oscillator_sector(g, pr.width, 6),
                  oscillator_sector(m.app_grid, pr.width * (1 - math.exp(-lam)), 6))
        residuals.append(conserves_quantity(m, momentum_operator(g),
                                            momentum_operator(m.app_grid), sector))
    g = OutcomeGrid(64, 20.0)
    mv = vn_scheme(g, 1.0, pr)
    vn_res = conserves_quantity(mv, momentum_operator(g), momentum_operator(mv.app_grid))
    mono = residuals[0] > residuals[1] > residuals[2]
    ok = kernel_err <= 1e-3 and mono and vn_res > 0.1
    report(capsys, 8, ok, f"kernel error (n=128) {kernel_err:.2e}; residuals "
                          f"{', '.join(f'{r:.2e}' for r in residuals)}; vn residual {vn_res:.3f}")


def test_criterion_9_property_suites(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    checks = {}
    povms = [random_povm(d, k, rng) for d in (2, 3, 4) for k in (2, 3)]
    checks["povm normalization"] = max(np.abs(e.effects.sum(axis=0) - np.eye(e.dim)).max()
                                       for e in povms) <= 1e-9
    choi_min = min(np.linalg.eigvalsh(choi_matrix(op))[0]
                   for e in povms for op in induced_instrument(scheme_from_povm(e)).ops)
    checks["choi positivity"] = choi_min >= -1e-10
    coh = max(np.abs(induced_povm(induced_instrument(scheme_from_povm(e))).effects
                     - e.effects).max() for e in povms)
    checks["instrument/POVM coherence"] = coh <= 1e-9
    u = random_unitary(4, rng)
    a = Povm.commuting([0, 1], u, np.array([[1, 1, 0, 0], [0, 0, 1, 1.0]]))
    lu = luders_instrument(a)
    vn = vn_discrete_instrument(a.combine(np.array([1.0, 2.0])), u)
    checks["Luders ideal and repeatable"] = bool(is_ideal(lu)) and bool(is_repeatable(lu))
    checks["degenerate vN repeatable, not ideal"] = bool(is_repeatable(vn)) and not is_ideal(vn)
    agree = 0
    for i in range(50):
        b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        b = b + b.conj().T
        if i % 2:
            b = sum(a.effect(k) @ b @ a.effect(k) for k in range(2))
        agree += luders_compatibility(a, b).equivalent
    checks["Luders theorem 50 pairs"] = agree == 50
    m = swap_scheme(Povm.commuting([0, 1, 2], np.eye(3), np.eye(3)), random_pure(3, rng))
    prof = [s for _, s in entanglement_profile(m, random_pure(3, rng), 20)]
    checks["swap entanglement profile"] = prof[0] <= 1e-9 and prof[-1] <= 1e-9 and max(prof) > 0.1
    elapsed = time.perf_counter() - t0
    failed = [k for k, v in checks.items() if not v]
    report(capsys, 9, not failed, f"{len(checks) - len(failed)}/{len(checks)} property checks "
                                  f"({elapsed:.1f}s){'; failed: ' + ', '.join(failed) if failed else ''}")
