"""Named experiments binding the library to report rows and plot series.

Every scenario takes a :class:`ScenarioConfig` and returns its rows and data
series.  Results depend only on the configuration (random draws use
``seeds``), so reruns are reproducible.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.stats import norm

from . import config
from .errors import (error_bar_width, global_standard_error, inaccuracy_delta, interior_window,
                     preparation_ur_check)
from .hilbert import (OutcomeGrid, momentum_operator, parity_operator, random_pure,
                      random_state, random_unitary)
from .instruments import (Instrument, gen_luders_compatibility, induced_povm, is_ideal,
                          is_repeatable, luders_compatibility, luders_instrument,
                          nondisturbance_is_trivial, ozawa_instrument, scalar_instrument,
                          vn_discrete_instrument, vn_position_instrument)
from .joint import (WERNER_C_REFERENCE, distorting_position_instrument,
                    kernel_product, mub_sequential_trivial, sequential_joint_observable,
                    verify_all, verify_error_bars, verify_noise, vn_qp_sequential,
                    werner_constant)
from .observables import (Povm, cells_in_interval, complementarity_overlap, interval_effect,
                          is_trivial, kernel_from_density, momentum_pvm, mub_pair,
                          position_pvm, probability_distribution, random_povm, smear)
from .plotting import Series
from .probes import SHAPES, Probe
from .report import ReportRow
from .schemes import (conserves_quantity, entanglement_profile, induced_instrument,
                      measured_observable, momentum_conserving_scheme, oscillator_sector,
                      ozawa_scheme, scheme_from_povm, swap_scheme, vn_scheme)


class ConfigError(ValueError):
    """Invalid scenario configuration (CLI exit status 2)."""


@dataclass
class ScenarioConfig:
    scenario: str = ""
    n_points: int = 256
    length: float = 20.0
    hbar: float = 1.0
    lam: float = 1.0
    probe_shape: str = "gaussian"
    probe_width: float = 1.0
    probe_separation: float = 3.0
    epsilons: tuple = (0.05, 0.1, 0.2)
    seeds: int = 0
    output_dir: str = ""
    extra: dict = field(default_factory=dict)
    explicit: frozenset = frozenset()

    def probe(self) -> Probe:
        return Probe(self.probe_shape, self.probe_width, self.probe_separation)

    def grid(self, offset: float = 0.0) -> OutcomeGrid:
        return OutcomeGrid(self.n_points, self.length, offset)

    def params(self, *keys) -> dict:
        names = {"n": "n_points", "L": "length", "lam": "lam", "probe": "probe_shape",
                 "width": "probe_width", "sep": "probe_separation", "seed": "seeds", "hbar": "hbar"}
        return {k: getattr(self, names[k]) for k in keys}

    def rng(self, stream: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seeds, stream])


# dotted config key -> (field, parser)
KEYS = {
    "grid.n_points": ("n_points", int),
    "grid.length": ("length", float),
    "hbar": ("hbar", float),
    "coupling.lambda": ("lam", float),
    "probe.shape": ("probe_shape", str),
    "probe.width": ("probe_width", float),
    "probe.separation": ("probe_separation", float),
    "epsilons": ("epsilons", lambda s: tuple(float(x) for x in str(s).split(",") if x.strip())),
    "seeds": ("seeds", int),
    "output_dir": ("output_dir", str),
}


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; a ``[section]`` header prefixes keys."""
    out, section = {}, ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[f"{section}.{k}" if section else k] = v
    return out


def build_config(scenario: str, settings: dict) -> ScenarioConfig:
    """Validated config from dotted settings, applying per-scenario defaults."""
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; see list-scenarios")
    merged = dict(SCENARIOS[scenario].defaults)
    merged.update(settings)
    cfg = ScenarioConfig(scenario=scenario)
    explicit = set()
    for key, raw in merged.items():
        if key.startswith("params."):
            cfg.extra[key[len("params."):]] = raw
            continue
        if key not in KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        name, parse = KEYS[key]
        try:
            setattr(cfg, name, parse(raw))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
        if key in settings:
            explicit.add(key)
    cfg.explicit = frozenset(explicit)
    validate_config(cfg)
    return cfg


def validate_config(cfg: ScenarioConfig) -> None:
    if not 16 <= cfg.n_points <= 4096:
        raise ConfigError("grid.n_points must lie in [16, 4096]")
    if not cfg.length > 0 or not cfg.hbar > 0 or not cfg.lam > 0:
        raise ConfigError("grid.length, hbar and coupling.lambda must be positive")
    if cfg.probe_shape not in SHAPES:
        raise ConfigError(f"probe.shape must be one of {SHAPES}")
    if not cfg.probe_width > 0:
        raise ConfigError("probe.width must be positive")
    if not cfg.epsilons or not all(0 < e < 0.5 for e in cfg.epsilons):
        raise ConfigError("epsilons must be a nonempty list in (0, 1/2)")
    if cfg.n_points % 2:
        raise ConfigError("grid.n_points must be even")
    for g in (cfg.grid(), cfg.grid().scaled(cfg.lam)):
        try:
            cfg.probe().sample(g)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def extra(cfg: ScenarioConfig, key: str, default, parse=float):
    return parse(cfg.extra[key]) if key in cfg.extra else default


class Rows(list):
    def __init__(self, scenario: str, params: dict):
        super().__init__()
        self.scenario, self.params = scenario, params

    def add(self, metric, value, bound=None, sense=">=", tol=0.0, passed=None, note="", **params):
        p = dict(self.params, **params)
        self.append(ReportRow(self.scenario, p, metric, float(value), bound, sense, tol,
                              passed if bound is not None else None, note))


@dataclass
class ScenarioResult:
    rows: list
    series: list
    seconds: float = 0.0


@dataclass
class Scenario:
    name: str
    description: str
    fn: object
    defaults: dict = field(default_factory=dict)


SCENARIOS: dict[str, Scenario] = {}


def scenario(name: str, description: str, **defaults):
    def deco(fn):
        SCENARIOS[name] = Scenario(name, description, fn, {k.replace("__", "."): v
                                                           for k, v in defaults.items()})
        return fn
    return deco


def list_scenarios() -> list[tuple[str, str]]:
    return [(s.name, s.description) for s in SCENARIOS.values()]


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    previous = config.HBAR
    config.set_hbar(cfg.hbar)
    try:
        t0 = time.perf_counter()
        rows, series = SCENARIOS[cfg.scenario].fn(cfg)
        return ScenarioResult(rows, series, time.perf_counter() - t0)
    finally:
        config.set_hbar(previous)


# -- helpers --------------------------------------------------------------------------------


def _guard(g: OutcomeGrid) -> float:
    return g.length / 4


def _continuum_density(probe: Probe):
    """Normalized ``|phi(x)|^2`` and the continuum amplitude normalization."""
    reach = 12 * probe.width + probe.separation / 2 if probe.shape != "uniform" else probe.width / 2
    z = 2 * integrate.quad(lambda x: probe.density(x), 0, reach, limit=200)[0]
    return (lambda x: probe.density(x) / z), z, reach


def _continuum_fourier_density(probe: Probe, k, hbar: float) -> np.ndarray:
    """``|phi~(k)|^2`` with ``phi~(k) = (2 pi hbar)^(-1/2) int phi(x) exp(-i k x / hbar) dx`` (even probes)."""
    _, z, reach = _continuum_density(probe)
    out = []
    for kk in np.atleast_1d(k):
        val = 2 * integrate.quad(lambda x: probe.amplitude(x), 0, reach, weight="cos",
                                 wvar=kk / hbar, limit=400)[0]
        out.append(val**2 / (2 * np.pi * hbar * z))
    return np.array(out)


def _truncated(g: OutcomeGrid, vec: np.ndarray, delta: float) -> np.ndarray:
    v = np.where(np.abs(g.points) <= delta + 1e-12, vec, 0)
    return v / np.linalg.norm(v)


def _max_apply_diff(a: Instrument, b: Instrument, states) -> float:
    return max(np.abs(oa.apply(t) - ob.apply(t)).max() for t in states for oa, ob in zip(a.ops, b.ops))


# -- scenarios ------------------------------------------------------------------------------


@scenario("vn-position", "impulsive position coupling: measured observable equals the smeared position")
def _vn_position(cfg):
    g, pr, lam = cfg.grid(), cfg.probe(), cfg.lam
    rows = Rows(cfg.scenario, cfg.params("n", "L", "lam", "probe", "width"))
    m = vn_scheme(g, lam, pr)
    e = measured_observable(m)
    kernel = kernel_from_density(g, lambda d: pr.density(lam * d))
    target = smear(kernel, position_pvm(g))
    rows.add("measured_vs_smear_residual", np.abs(e.weights - target.weights).max(), 1e-8, "<=")
    rng = cfg.rng()
    chi = pr.sample(g.scaled(lam))
    states = [random_state(g.n_points, rng, 2) for _ in range(2)]
    rows.add("instrument_vs_kraus_residual",
             _max_apply_diff(induced_instrument(m), vn_position_instrument(g, lam, chi), states),
             1e-8, "<=")
    rows.add("unitarity_residual", m.coupling.unitarity_residual(), 1e-10, "<=")
    if pr.shape == "gaussian":
        rows.add("kernel_std", math.sqrt(kernel.var()), pr.width / lam, "==", 1e-6)
    dens = kernel.weights / g.spacing
    fdens, _, _ = _continuum_density(pr)
    return rows, [Series("kernel_grid", g.points, dens, "q", "e(q)", "confidence_kernel", "step"),
                  Series("kernel_continuum", g.points, lam * fdens(lam * g.points), "q", "e(q)",
                         "confidence_kernel")]


@scenario("ozawa-sharp", "product coupling: sharp position statistics and delta-repeatability")
def _ozawa_sharp(cfg):
    g, pr = cfg.grid(), cfg.probe()
    delta = extra(cfg, "delta", 1.0)
    rows = Rows(cfg.scenario, dict(cfg.params("n", "L", "probe", "width"), delta=delta))
    rng = cfg.rng()
    pure = _truncated(g, pr.sample(g), delta)
    flat = _truncated(g, np.ones(g.n_points, complex), delta)
    probes = {"pure": np.outer(pure, pure.conj()),
              "mixed": 0.6 * np.outer(pure, pure.conj()) + 0.4 * np.outer(flat, flat.conj())}
    q = position_pvm(g)
    states = [random_state(g.n_points, rng, 1 if i % 2 else 3) for i in range(20)]
    series = []
    for label, ta in probes.items():
        instr = ozawa_instrument(g, ta)
        dev = 0.0
        for t in states:
            p_instr = np.array([np.trace(op.apply(t)).real for op in instr.ops])
            dev = max(dev, np.abs(p_instr - probability_distribution(q, t).weights).max())
        rows.add("statistics_deviation", dev, 1e-8, "<=", probe_state=label)
        rep = is_repeatable(instr, d=delta)
        rows.add("delta_repeatability_margin", rep.margin, -1e-9, ">=", probe_state=label)
        series.append(Series(f"probe_{label}", g.points, np.diag(ta).real, "x", "probe mass",
                             "probe_position_mass", "step"))
    # the dilation itself, on a smaller grid with the same spacing
    ns = 64
    gs = OutcomeGrid(ns, g.spacing * ns)
    ps = _truncated(gs, pr.sample(gs), delta)
    ta = 0.7 * np.outer(ps, ps.conj()) + 0.3 * np.outer(np.roll(ps, 1), np.roll(ps, 1).conj())
    m = ozawa_scheme(gs, ta)
    e = measured_observable(m)
    sharp = np.abs(e.effects - position_pvm(gs).effects).max()
    rows.add("scheme_sharpness_deviation", sharp, 1e-8, "<=", n_scheme=ns)
    r = parity_operator(gs)
    small = [random_state(ns, rng, 2) for _ in range(3)]
    rows.add("scheme_instrument_residual",
             _max_apply_diff(induced_instrument(m), ozawa_instrument(gs, r @ ta @ r.conj().T), small),
             1e-8, "<=", n_scheme=ns)
    rev = measured_observable(ozawa_scheme(gs, ta, reverse=True))
    rows.add("reversed_order_sharpness_deviation",
             np.abs(rev.effects - position_pvm(gs).effects).max(), 1e-3, ">=", n_scheme=ns,
             note="reversed factor order is not a sharp position measurement")
    return rows, series


def _family_grid(cfg) -> OutcomeGrid:
    return cfg.grid()


@scenario("sequential-qp", "position then momentum: marginals, Fourier relation and the four bounds",
          grid__length="40")
def _sequential_qp(cfg):
    g, pr, lam, hbar = _family_grid(cfg), cfg.probe(), cfg.lam, cfg.hbar
    rows = Rows(cfg.scenario, cfg.params("n", "L", "lam", "probe", "width", "sep"))
    m = vn_qp_sequential(g, lam, pr)
    rows.add("marginal1_residual", m.residuals[0], 1e-6, "<=")
    rows.add("marginal2_residual", m.residuals[1], 1e-6, "<=")
    e, f = m.kernels
    fdens, _, _ = _continuum_density(pr)
    q = g.points
    e_grid = e.weights / g.spacing
    e_cont = lam * fdens(lam * q)
    pg = g.momentum_grid(hbar)
    f_grid = f.weights / pg.spacing
    f_cont = _continuum_fourier_density(pr, -pg.points / lam, hbar) / lam
    if pr.shape != "uniform":
        rows.add("e_density_pointwise", np.abs(e_grid - e_cont).max(), 1e-6, "<=")
        rows.add("f_density_pointwise", np.abs(f_grid - f_cont).max(), 1e-6, "<=")
    prod = kernel_product(m)
    rows.add("kernel_std_product", prod, 0.499 * hbar, ">=")
    if pr.shape == "gaussian":
        rows.add("kernel_std_product_saturation", prod, hbar / 2, "==", 1e-3)
    for r in verify_all(m, eps=(0.1, 0.1)):
        rows.add(f"{r.measure}_product", r.product, r.bound, ">=", passed=r.passed, note=r.note)
        if r.measure == "noise":
            rows.add("noise_product_vs_linear_bound", r.product,
                     note=f"against hbar/2={hbar / 2:g}: pass={r.extra['pass_linear']} (units slip)")
    return rows, [Series("e_grid", q, e_grid, "q", "density", "position_kernel", "step"),
                  Series("e_continuum", q, e_cont, "q", "density", "position_kernel"),
                  Series("f_grid", pg.points, f_grid, "p", "density", "momentum_kernel", "step"),
                  Series("f_continuum", pg.points, f_cont, "p", "density", "momentum_kernel")]


@scenario("werner-constant", "lowest eigenvalue of |Q| + |P| and the Werner constant",
          grid__n_points="512", grid__length="40")
def _werner_constant(cfg):
    t0 = time.perf_counter()
    g = cfg.grid(offset=0.5)
    rows = Rows(cfg.scenario, cfg.params("n", "L"))
    c = werner_constant(g, 1.0, 1.0, cfg.hbar)
    elapsed = time.perf_counter() - t0
    e0 = 2 * math.sqrt(c * cfg.hbar)
    rows.add("C", c, WERNER_C_REFERENCE, "==", 1e-3)
    rows.add("E0", e0, 2 * math.sqrt(WERNER_C_REFERENCE * cfg.hbar), "==", 2e-3)
    rows.add("runtime_seconds", elapsed, 30.0, "<=")
    rows.add("C_grid_with_origin", werner_constant(cfg.grid(offset=0.0), 1.0, 1.0, cfg.hbar),
             note="grid containing x = 0 and p = 0; asymmetric, reported only")
    from .hilbert import function_of_momentum
    h = np.diag(np.abs(g.points)) + function_of_momentum(g, np.abs, cfg.hbar)
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    return rows, [Series("ground_state", g.points, np.abs(v[:, 0]) ** 2 / g.spacing, "x",
                         "|psi(x)|^2", "werner_ground_state")]


def _sharp_sequential(g: OutcomeGrid, width: float):
    """Sharp position with a localized state preparation, followed by sharp momentum."""
    t0 = np.exp(-g.points**2 / (4 * width**2)).astype(complex)
    t0 /= np.linalg.norm(t0)
    q, p = position_pvm(g), momentum_pvm(g)
    return sequential_joint_observable(distorting_position_instrument(g, np.outer(t0, t0.conj())),
                                       p, (q, p))


@scenario("error-bars", "error-bar widths of the sequential marginals and their product bound",
          grid__length="40")
def _error_bars(cfg):
    g, pr, lam = _family_grid(cfg), cfg.probe(), cfg.lam
    rows = Rows(cfg.scenario, cfg.params("n", "L", "lam", "probe", "width"))
    m = vn_qp_sequential(g, lam, pr)
    q, p = m.targets
    e, f = m.kernels
    pg = p.grid
    for eps in cfg.epsilons:
        w1 = error_bar_width(m.marginal1, q, eps)
        w2 = error_bar_width(m.marginal2, p, eps)
        if pr.shape == "gaussian":
            z = norm.ppf(1 - eps / 2)
            # widths are odd cell counts, so the oracle is met to within two cells
            rows.add("W1_vs_quantile", w1.value, 2 * z * math.sqrt(e.var()), "==",
                     2 * g.spacing, eps=eps)
            rows.add("W2_vs_quantile", w2.value, 2 * z * math.sqrt(f.var()), "==",
                     2 * pg.spacing, eps=eps)
        r = verify_error_bars(m, eps, eps)
        rows.add("error_bar_product", r.product, r.bound, ">=", passed=r.passed, eps=eps)
    gse = global_standard_error(m.marginal1, q, interior_window(q, _guard(g))).value
    w = error_bar_width(m.marginal1, q, 0.1)
    rows.add("finite_se_implies_finite_W", float(w.finite), 1.0, ">=",
             note=f"standard error {gse:.6g}")
    ns = 64
    gs = OutcomeGrid(ns, g.length * ns / g.n_points)
    ms = _sharp_sequential(gs, 0.3)
    r = verify_error_bars(ms, 0.1, 0.1)
    rows.add("sharp_position_W2_infinite", float(math.isinf(r.factors[1])), 1.0, ">=", n_small=ns)
    rows.add("sharp_position_product", r.product, r.bound, ">=", passed=r.passed, n_small=ns,
             note=r.note)
    ladder = [1, 3, 5, 9, 17, 33]
    vals = [inaccuracy_delta(m.marginal1, q, k * g.spacing, 0.1).value for k in ladder]
    return rows, [Series("inaccuracy_vs_delta", np.array(ladder) * g.spacing, vals, "delta",
                         "inaccuracy (eps=0.1)", "inaccuracy_ladder", "points")]


@scenario("noise-ur", "intrinsic noise product against (hbar/2)^2 and hbar/2", grid__length="40")
def _noise_ur(cfg):
    g, pr, lam, hbar = _family_grid(cfg), cfg.probe(), cfg.lam, cfg.hbar
    rows = Rows(cfg.scenario, cfg.params("n", "L", "lam", "probe", "width"))
    m = vn_qp_sequential(g, lam, pr)
    r = verify_noise(m)
    rows.add("noise_M1", r.factors[0])
    rows.add("noise_M2", r.factors[1])
    rows.add("noise_product", r.product, r.bound, ">=", passed=r.passed, note="squared units")
    rows.add("noise_product_vs_linear_bound", r.product,
             note=f"against hbar/2={hbar / 2:g}: pass={r.extra['pass_linear']}")
    e, f = m.kernels
    if pr.shape == "gaussian":
        rows.add("kernel_variance_product", e.var() * f.var(), (hbar / 2) ** 2, "==", 1e-3)
    ns = 64
    ms = _sharp_sequential(OutcomeGrid(ns, g.length * ns / g.n_points), 0.3)
    rs = verify_noise(ms)
    rows.add("sharp_marginal_case", rs.product if math.isfinite(rs.product) else math.inf,
             rs.bound, ">=", passed=rs.passed, n_small=ns, note=rs.note)
    widths = [0.5, 0.75, 1.0, 1.5, 2.0]
    prods = []
    for s in widths:
        mw = vn_qp_sequential(g, lam, Probe(pr.shape, s, pr.separation))
        prods.append(verify_noise(mw).product)
    return rows, [Series("noise_product_vs_width", widths, prods, "probe width", "N(M1) N(M2)",
                         "noise_products", "points")]


@scenario("way-momentum", "momentum-conserving coupling: unsharp position and conservation residuals",
          coupling__lambda=repr(math.log(2)))
def _way_momentum(cfg):
    g, pr, lam = cfg.grid(), cfg.probe(), cfg.lam
    rows = Rows(cfg.scenario, cfg.params("n", "L", "lam", "probe", "width"))
    c = math.exp(lam) - 1
    sizes = sorted({64, 128, 256, cfg.n_points})
    resid = []
    for n in sizes:
        gn = OutcomeGrid(n, g.length)
        m = momentum_conserving_scheme(gn, lam, pr)
        sector = (oscillator_sector(gn, pr.width, 6),
                  oscillator_sector(m.app_grid, pr.width * (1 - math.exp(-lam)), 6))
        resid.append(conserves_quantity(m, momentum_operator(gn), momentum_operator(m.app_grid),
                                        sector))
        if n == 128:
            e = measured_observable(m)
            kernel = kernel_from_density(gn, lambda d: pr.density(c * d))
            target = smear(kernel, position_pvm(gn))
            inside = np.abs(gn.points) <= gn.length / 2 - _guard(gn)
            err = np.abs(e.weights[:, inside] - target.weights[:, inside]).max()
            rows.add("kernel_residual_interior", err, 1e-3, "<=")
            rows.add("kernel_residual_full_grid", np.abs(e.weights - target.weights).max(),
                     note="edge cells wrap around the periodic window")
            rows.add("unitarity_residual", m.coupling.unitarity_residual(), 1e-10, "<=")
            j = n // 2
            kseries = [Series("measured_kernel", gn.points, e.weights[:, j] / gn.spacing, "q",
                              "density", "conserving_kernel", "step"),
                       Series("predicted_kernel", gn.points, target.weights[:, j] / gn.spacing,
                              "q", "density", "conserving_kernel")]
    for n, r in zip(sizes, resid):
        rows.add("conservation_residual_sector", r, n_res=n)
    mono = all(b < a for a, b in zip(resid, resid[1:]))
    rows.add("residual_decreasing", float(mono), 1.0, ">=")
    if 256 in sizes:
        rows.add("residual_at_256", resid[sizes.index(256)], 1e-2, "<=")
    gv = OutcomeGrid(128, g.length)
    mv = vn_scheme(gv, 1.0, pr)
    rv = conserves_quantity(mv, momentum_operator(gv), momentum_operator(mv.app_grid))
    rows.add("vn_residual_total_momentum", rv, 0.1, ">=", n_res=128)
    return rows, kseries + [Series("residual_vs_n", sizes, np.log10(np.maximum(resid, 1e-300)),
                                   "n_points", "log10 residual", "conservation_residual", "points")]


@scenario("wigner-spin", "three-outcome unsharp spin-x observable")
def _wigner_spin(cfg):
    from .schemes import wigner_spin_povm
    rows = Rows(cfg.scenario, {})
    sx = Povm.commuting(["+", "-"], np.array([[1, 1], [1, -1]]) / np.sqrt(2), np.eye(2))
    eps_list = sorted(set(cfg.epsilons) | {1.0})
    dists = []
    for eps in eps_list:
        e = wigner_spin_povm(eps)
        dist = max(np.linalg.norm(e.effect(i) - sx.effect(i), 2) for i in range(2))
        dists.append(dist)
        rows.add("distance_to_sharp", dist, eps, "==", 1e-12, eps=eps)
        rows.add("unknown_effect_scalar",
                 np.abs(e.effect(2) - eps * np.eye(2)).max(), 1e-12, "<=", eps=eps)
        if eps < 1:
            instr = luders_instrument(e)
            rep = is_repeatable(Instrument(["+", "-"], instr.ops[:2], validate=False), eps=eps)
            rows.add("luders_repeatable_at_confidence", rep.margin, -1e-12, ">=", eps=eps)
            sharp = is_repeatable(Instrument(["+", "-"], instr.ops[:2], validate=False))
            rows.add("sharp_repeatability_margin", sharp.margin, -1e-12, "<=", eps=eps,
                     note="not repeatable")
        else:
            rows.add("trivial_at_eps_1", float(is_trivial(e)), 1.0, ">=", eps=eps)
    return rows, [Series("distance_vs_eps", eps_list, dists, "eps", "||E_+ - P_+||",
                         "wigner_distance", "points")]


@scenario("mub-complementarity", "sequential measurement of mutually unbiased bases")
def _mub(cfg):
    rows = Rows(cfg.scenario, {})
    ns = [2, 3, 5, 7]
    devs = []
    for n in ns:
        v = mub_sequential_trivial(n)
        devs.append(v.deviation)
        rows.add("effective_observable_deviation", v.deviation, 1e-12, "<=", n=n)
        rows.add("constant_error", np.abs(v.constants - 1 / n).max(), 1e-12, "<=", n=n)
    rng = cfg.rng()
    u = random_unitary(3, rng)
    other = Povm.commuting(list(range(3)), u, np.eye(3))
    v = mub_sequential_trivial(3, other)
    rows.add("non_mub_deviation", v.deviation, 1e-3, ">=", n=3, note="random second basis")
    a, b = mub_pair(2)
    t = np.outer([1, 0], [1, 0]).astype(complex)
    pb = probability_distribution(b, t).weights
    rows.add("spin_half_uniformity", np.abs(pb - 0.5).max(), 1e-12, "<=", n=2)
    return rows, [Series("deviation_vs_n", ns, np.maximum(devs, 1e-17), "n", "deviation",
                         "mub_deviation", "points")]


@scenario("complementarity-projections", "overlap of position and momentum spectral projections")
def _complementarity_projections(cfg):
    g = cfg.grid()
    rows = Rows(cfg.scenario, cfg.params("n", "L"))
    q, p = position_pvm(g), momentum_pvm(g, cfg.hbar)
    pg = p.grid
    widths = [0.5, 1.0, 2.0, 4.0, 8.0]
    overlaps = []
    for w in widths:
        qx = interval_effect(q, cells_in_interval(g, 0.0, w))
        py = interval_effect(p, cells_in_interval(pg, 0.0, w))
        overlaps.append(complementarity_overlap(qx, py))
    rows.add("overlap_unit_intervals", overlaps[widths.index(2.0)], 1 - 1e-9, "<=",
             note="X = [-1, 1], Y = [-1, 1]")
    for w, ov in zip(widths, overlaps):
        # wide intervals approach 1 exponentially; reported as 1 - overlap
        rows.add("overlap_deficit", 1 - ov, width=w)
    rng = cfg.rng()
    t0v = np.exp(-g.points**2 / (4 * 0.5**2)).astype(complex)
    t0v /= np.linalg.norm(t0v)
    t0 = np.outer(t0v, t0v.conj())
    instr = distorting_position_instrument(g, t0)
    ref = probability_distribution(p, t0).weights
    dev = 0.0
    for _ in range(20):
        t = random_state(g.n_points, rng, 2)
        dev = max(dev, np.abs(probability_distribution(p, instr.total(t)).weights - ref).max())
    rows.add("distorted_momentum_deviation", dev, 1e-9, "<=", states=20)
    sharp = np.abs(induced_povm(instr).weights - np.eye(g.n_points)).max()
    rows.add("distorting_instrument_sharpness", sharp, 1e-10, "<=")
    return rows, [Series("overlap_vs_width", widths, overlaps, "interval width", "||Q(X) P(Y)||",
                         "complementarity_overlap", "points")]


@scenario("no-disturbance", "nondisturbing instruments have trivial observables; witnesses otherwise")
def _no_disturbance(cfg):
    rows = Rows(cfg.scenario, {})
    consts = np.array([0.2, 0.3, 0.5])
    v = nondisturbance_is_trivial(scalar_instrument(4, consts))
    rows.add("scalar_nondisturbing", float(v.nondisturbing), 1.0, ">=")
    rows.add("scalar_trivial", float(bool(v.trivial)), 1.0, ">=")
    rows.add("constants_error", np.abs(v.constants - consts).max(), 1e-9, "<=")
    rng = cfg.rng()
    u = random_unitary(4, rng)
    pvm = Povm.commuting([0, 1, 2, 3], u, np.eye(4))
    lv = nondisturbance_is_trivial(luders_instrument(pvm))
    rows.add("luders_witness_disturbance", lv.deviation, 0.5, ">=")
    g = OutcomeGrid(16, 4.0)
    t0 = np.zeros((16, 16), complex)
    t0[8, 8] = 1
    ov = nondisturbance_is_trivial(ozawa_instrument(g, t0))
    rows.add("ozawa_witness_disturbance", ov.deviation, 0.5, ">=", n=16)
    return rows, []


@scenario("entanglement-profile", "transient entanglement along the swap interpolation")
def _entanglement(cfg):
    rows = Rows(cfg.scenario, {"d": 3})
    rng = cfg.rng()
    d = 3
    phi, chi = random_pure(d, rng), random_pure(d, rng)
    e = Povm.commuting(list(range(d)), np.eye(d), np.eye(d))
    m = swap_scheme(e, chi)
    prof = entanglement_profile(m, phi, steps=40)
    ts, ss = zip(*prof)
    rows.add("entropy_t0", ss[0], 1e-9, "<=")
    rows.add("entropy_t1", ss[-1], 1e-9, "<=")
    rows.add("entropy_interior_max", max(ss[1:-1]), 0.1, ">=")
    final = m.coupling.apply(np.einsum("x,y->xy", phi, chi))
    red = final.T @ final.conj()
    fid = float(np.real(phi.conj() @ red @ phi))
    rows.add("transfer_fidelity", fid, 1.0, "==", 1e-9)
    g = OutcomeGrid(64, 8.0)
    mv = vn_scheme(g, 1.0, Probe("gaussian", 0.5))
    eig = np.zeros(64, complex)
    eig[40] = 1
    rows.add("vn_eigenstate_max_entropy", max(s for _, s in entanglement_profile(mv, eig, 10)),
             1e-9, "<=", n=64)
    two = np.zeros(64, complex)
    two[[24, 40]] = 1 / np.sqrt(2)
    rows.add("vn_superposition_final_entropy", entanglement_profile(mv, two, 1)[-1][1], 1e-3, ">=",
             n=64)
    return rows, [Series("swap_entropy", ts, ss, "t", "entropy (nats)", "entanglement_profile")]


def _random_degenerate_pvm(d, rng):
    u = random_unitary(d, rng)
    w = np.zeros((2, d))
    w[0, : d // 2] = 1
    w[1, d // 2:] = 1
    return Povm.commuting([0, 1], u, w)


@scenario("luders-compat", "Lüders theorem: invariance under the Lüders map versus commutation")
def _luders_compat(cfg):
    rows = Rows(cfg.scenario, {"pairs": 50, "d": 4})
    rng = cfg.rng()
    agree, commuting = 0, 0
    for i in range(50):
        a = _random_degenerate_pvm(4, rng)
        h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        h = (h + h.conj().T) / 2
        if i % 2 == 0:
            h = sum(a.effect(k) @ h @ a.effect(k) for k in range(2))
        v = luders_compatibility(a, h)
        agree += v.equivalent
        commuting += v.cond_b
    rows.add("equivalent_pairs", agree, 50, "==", 0.5)
    rows.add("commuting_pairs", commuting, 25, "==", 0.5)
    return rows, []


@scenario("gen-luders-compat", "generalized Lüders map for two-outcome unsharp observables")
def _gen_luders_compat(cfg):
    rows = Rows(cfg.scenario, {"pairs": 50, "d": 4})
    rng = cfg.rng()
    agree, commuting = 0, 0
    for i in range(50):
        u = random_unitary(4, rng)
        lam = rng.uniform(0, 1, 4)
        e = Povm.commuting([0, 1], u, np.stack([lam, 1 - lam]))
        if i % 2 == 0:
            b = (u * rng.normal(size=4)) @ u.conj().T
        else:
            b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            b = (b + b.conj().T) / 2
        v = gen_luders_compatibility(e, b)
        agree += v.equivalent
        commuting += v.cond_b
    rows.add("equivalent_pairs", agree, 50, "==", 0.5)
    rows.add("commuting_pairs", commuting, 25, "==", 0.5)
    return rows, []


@scenario("repeatability-ladder", "repeatability and ideality classifications")
def _repeatability(cfg):
    rows = Rows(cfg.scenario, {})
    rng = cfg.rng()
    a = _random_degenerate_pvm(4, rng)
    lu = luders_instrument(a)
    rows.add("luders_repeatable", is_repeatable(lu).margin, -1e-9, ">=")
    rows.add("luders_ideal", is_ideal(lu).margin, -1e-9, ">=")
    h = a.combine(np.array([1.0, 2.0]))
    vn = vn_discrete_instrument(h, a.basis)
    rows.add("degenerate_vn_repeatable", is_repeatable(vn).margin, -1e-9, ">=")
    rows.add("degenerate_vn_ideal_violation", -is_ideal(vn).margin, 1e-3, ">=",
             note="rank-one Kraus operators decohere degenerate eigenspaces")
    g = OutcomeGrid(64, 8.0)
    t0v = np.exp(-g.points**2 / (4 * 0.2**2)).astype(complex)
    t0v /= np.linalg.norm(t0v)
    instr = ozawa_instrument(g, np.outer(t0v, t0v.conj()))
    ds = [0.0, 0.125, 0.25, 0.5, 1.0]
    series = []
    for eps in cfg.epsilons:
        margins = [is_repeatable(instr, d=dd, eps=eps).margin for dd in ds]
        series.append(Series(f"margin_eps_{eps:g}", ds, margins, "d", "repeatability margin",
                             "repeatability_ladder", "points"))
        rows.add("localized_preparation_margin_d1", margins[-1], -1e-9, ">=", eps=eps)
    return rows, series


@scenario("preparation-ur", "preparation uncertainty relation on the grid")
def _preparation(cfg):
    g = cfg.grid()
    rows = Rows(cfg.scenario, cfg.params("n", "L"))
    s = extra(cfg, "sigma", 1.0)
    v = np.exp(-g.points**2 / (4 * s**2)).astype(complex)
    v /= np.linalg.norm(v)
    prod, ok = preparation_ur_check(np.outer(v, v.conj()), g, cfg.hbar)
    rows.add("gaussian_product", prod, cfg.hbar / 2, "==", 1e-3, sigma=s)
    rng = cfg.rng()
    inside = np.abs(g.points) <= g.length / 4
    prods = []
    for _ in range(100):
        w = np.zeros(g.n_points, complex)
        w[inside] = rng.normal(size=inside.sum()) + 1j * rng.normal(size=inside.sum())
        w /= np.linalg.norm(w)
        prods.append(preparation_ur_check(np.outer(w, w.conj()), g, cfg.hbar)[0])
    rows.add("random_states_min_product", min(prods), 0.499 * cfg.hbar, ">=", states=100)
    return rows, [Series("random_products", np.arange(100), np.sort(prods), "rank",
                         "dQ dP", "preparation_products", "points")]


@scenario("scheme-roundtrip", "schemes from observables and back; instrument coherence")
def _roundtrip(cfg):
    rows = Rows(cfg.scenario, {})
    rng = cfg.rng()
    e = random_povm(3, 4, rng)
    m = scheme_from_povm(e)
    rows.add("povm_roundtrip", np.abs(measured_observable(m).effects - e.effects).max(), 1e-9, "<=")
    states = [random_state(3, rng) for _ in range(3)]
    rows.add("instrument_is_generalized_luders",
             _max_apply_diff(induced_instrument(m), luders_instrument(e), states), 1e-9, "<=")
    iso = m.coupling.matrix[:, np.arange(3) * 4]
    rows.add("isometry_residual", np.abs(iso.conj().T @ iso - np.eye(3)).max(), 1e-10, "<=")
    qubit = Povm([0, 1], np.array([np.diag([0.7, 0.3]), np.diag([0.3, 0.7])]))
    rows.add("unsharp_qubit_roundtrip",
             np.abs(measured_observable(scheme_from_povm(qubit)).effects - qubit.effects).max(),
             1e-9, "<=")
    pointer = Povm.commuting(list(range(3)), random_unitary(3, rng), rng.dirichlet(np.ones(3), 3).T)
    ms = swap_scheme(pointer, random_pure(3, rng))
    rows.add("swap_measures_pointer",
             np.abs(measured_observable(ms).effects - ms.pointer.effects).max(), 1e-10, "<=")
    g = OutcomeGrid(64, 8.0)
    mv = vn_scheme(g, 1.0, Probe("gaussian", 0.5))
    iv = induced_instrument(mv)
    rows.add("vn_coherence",
             np.abs(induced_povm(iv).weights - measured_observable(mv).weights).max(), 1e-9, "<=",
             n=64)
    return rows, []
