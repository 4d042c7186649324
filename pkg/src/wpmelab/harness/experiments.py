"""Named verification experiments.

Each experiment takes an :class:`ExperimentConfig`, a seeded generator and a
thread bound, and returns an :class:`ExperimentReport`. Independent solver
runs inside an experiment go through :func:`pmap`, which preserves input
order, so reports do not depend on the thread count.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..errors import ConfigError, DomainError
from ..grid import GridFunction, cumulative_integral
from ..model import ProblemParams, WeightSpec, derive_exponents, existence_time, sphere_area
from ..norms import (PhiAlpha, alpha_threshold, cutoff_norm_pr, ell_tail, embedding_check,
                     growth_exponent, holder_constant, limsup_rate, norm_1r, norm_inf_r,
                     norm_pr, truncate)
from ..profiles import (ExplicitFamily, compact_profile, critical_product, explicit_value,
                        far_field_slope, shoot_profile)
from ..solver import BoundaryData, SolverOptions, solve, truncate_datum
from .config import GridSpec, build_datum, load_config
from .report import ExperimentReport

SEED_DEFAULT = 20240601


def experiment_rng(seed, name):
    """Generator private to one experiment, so run order never matters."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])


def pmap(fn, items, threads=1):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def refined(spec, factor):
    """Grid spec with ``factor`` times the cells; geometric widths split evenly."""
    return GridSpec(spec.R_max, int(spec.M * factor), spec.stretch ** (1.0 / factor))


def loglog_slope(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    if np.any(y <= 0):
        return math.nan
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def weighted_l1(grid, values):
    return float(np.sum(grid.cell_weight_mass * np.abs(values)))


def _opts(cfg, **kw):
    base = {k: getattr(cfg.solver, k) for k in cfg.solver.__dataclass_fields__}
    base.update(kw)
    return SolverOptions(**base)


# ---------------------------------------------------------------- explicit family

def exp_explicit_convergence(cfg, rng=None, threads=1):
    params = cfg.params
    if not params.weight.is_pure_power:
        raise ConfigError("explicit_convergence needs the pure power weight")
    if cfg.datum.kind != "explicit":
        raise ConfigError("explicit_convergence needs an explicit datum")
    fam = ExplicitFamily(params, cfg.datum.get("a"), cfg.datum.get("b"))
    t_end = cfg.t_end
    if not t_end < fam.T:
        raise ConfigError(f"t_end must precede the blow-up time T={fam.T:g}")
    bc = BoundaryData("dirichlet_explicit", family=fam)
    rep = ExperimentReport("explicit_convergence", cfg.echo())
    rep.measured.update(kappa=fam.kappa, T=fam.T, coefficient=fam.coefficient)
    anchor = "explicit solution family of the pure power problem"

    def errors(grid, tr):
        exact = explicit_value(fam, grid.nodes, t_end)
        d = tr.final.values - exact
        rel = float(np.max(np.abs(d) / np.abs(exact)))
        l1 = weighted_l1(grid, d) / weighted_l1(grid, exact)
        return rel, l1

    def uniform(M, steps):
        grid = GridSpec(cfg.grid.R_max, int(M), 1.0).build(params)
        u0 = grid.sample(fam.datum)
        times = np.linspace(0.0, t_end, int(steps) + 1)[1:]
        tr = solve(params, u0, t_end, _opts(cfg), bc, output_times=[t_end], step_times=times)
        return errors(grid, tr)

    grid = cfg.grid.build(params)
    tr = solve(params, grid.sample(fam.datum), t_end, _opts(cfg), bc, output_times=[t_end])
    rel, l1 = errors(grid, tr)
    rep.measured.update(max_rel_error=rel, l1_rel_error=l1, steps=int(tr.step_times.size))
    rep.check_le("max relative error at the configured resolution", anchor, rel,
                 cfg.number("max_rel_error", 0.02))

    # space: dt ~ h^2 so the temporal error shrinks with the spatial one
    Ms = cfg.floats("space_M", [50, 100, 200, 400])
    steps0 = cfg.number("space_steps0", 50)
    space = pmap(lambda M: uniform(M, round(steps0 * (M / Ms[0]) ** 2)), Ms, threads)
    h = [cfg.grid.R_max / M for M in Ms]
    s_l1 = loglog_slope(h, [e[1] for e in space])
    s_max = loglog_slope(h, [e[0] for e in space])
    lo, hi = cfg.floats("space_slope", [1.7, 2.3])
    rep.check_in("spatial refinement slope, weighted l1 error", anchor, s_l1, lo, hi)
    rep.measured.update(space_slope_l1=s_l1, space_slope_max=s_max)

    Mt = cfg.number("time_M", 1600, int)
    nt = cfg.floats("time_steps", [10, 20, 40, 80])
    timing = pmap(lambda n: uniform(Mt, n), nt, threads)
    dts = [t_end / n for n in nt]
    t_l1 = loglog_slope(dts, [e[1] for e in timing])
    t_max = loglog_slope(dts, [e[0] for e in timing])
    lo, hi = cfg.floats("time_slope", [0.8, 1.2])
    rep.check_in("temporal refinement slope, weighted l1 error", anchor, t_l1, lo, hi)
    rep.measured.update(time_slope_l1=t_l1, time_slope_max=t_max)

    rep.table("refinement", {
        "study": ["space"] * len(Ms) + ["time"] * len(nt),
        "M": list(Ms) + [Mt] * len(nt),
        "steps": [round(steps0 * (M / Ms[0]) ** 2) for M in Ms] + list(nt),
        "h": h + [cfg.grid.R_max / Mt] * len(nt),
        "dt": [t_end / round(steps0 * (M / Ms[0]) ** 2) for M in Ms] + dts,
        "err_l1": [e[1] for e in space + timing],
        "err_max": [e[0] for e in space + timing],
    })
    return rep


# ---------------------------------------------------------------- elliptic profiles

def exp_elliptic_profile(cfg, rng=None, threads=1):
    params = cfg.params
    T = cfg.datum.get("T", 1.0) if cfg.datum.kind == "profile" else 1.0
    beta = cfg.datum.get("beta", 1.0) if cfg.datum.kind == "profile" else 1.0
    grid = cfg.grid.build(params)
    rep = ExperimentReport("elliptic_profile", cfg.echo())
    anchor_shoot = "radial elliptic profile, integral formulation"

    prof = shoot_profile(params, beta, T, grid, tol=cfg.number("picard_tol", 1e-10))
    rep.measured.update(picard_iters=prof.picard_iters, residual=prof.residual)
    rep.check_le("Picard residual", anchor_shoot, prof.residual, cfg.number("residual_max", 1e-8))

    # first Picard correction: V = beta^m + c y^{2-gamma} + ...
    g = params.gamma
    c = beta / (T * (params.m - 1) * (2 - g) * (params.N - g))
    y, V = grid.nodes, prof.V_samples
    y_small = cfg.number("small_y", 1e-2)
    sel = (y > 0) & (y <= y_small)
    if sel.sum() < 3:
        raise ConfigError("grid has fewer than three nodes in the small-y window")
    coef = (V[sel] - beta**params.m) / (c * y[sel] ** (2 - g))
    small_err = float(np.max(np.abs(coef - 1.0)))
    rep.measured.update(small_y_nodes=int(sel.sum()), small_y_coefficient=c)
    rep.check_le("small-y expansion, relative error of the first correction",
                 anchor_shoot, small_err, cfg.number("small_y_tol", 0.01))

    lo, hi = cfg.floats("slope_window", [1e2, 1e3])
    if hi > grid.R_max * (1 + 1e-12):
        raise ConfigError("slope window exceeds R_max")
    slope = far_field_slope(y, V, lo, hi)
    expected = prof.expected_slope
    rel = abs(slope - expected) / expected
    rep.measured.update(far_field_slope=slope, expected_slope=expected,
                        far_field_slope_last_decade=prof.asymptotic_slope)
    rep.check_le("far-field slope of V on the window, relative deviation",
                 "asymptotic behaviour of the elliptic profiles", rel,
                 cfg.number("slope_tol", 0.02))

    betas = sorted(cfg.floats("betas", [0.5, 1.0, 2.0, 4.0]))
    profs = pmap(lambda b: shoot_profile(params, b, T, grid), betas, threads)
    gaps = [float(np.min(p2.V_samples - p1.V_samples)) for p1, p2 in zip(profs, profs[1:])]
    rep.measured.update(betas=betas, min_ordering_gap=gaps,
                        slopes=[p.asymptotic_slope for p in profs])
    rep.check("beta ordering at every node", "ordering principle for the profiles",
              min(gaps), {"min_exclusive": 0.0}, min(gaps) > 0)
    rep.table("profile", {"radius": y, "W": prof.W_samples, "V": V})
    return rep


# ---------------------------------------------------------------- blow-up

def _blowup_run(params, prof, opts):
    u0 = prof.W
    bc = BoundaryData.separable(u0, prof.T, params.m)
    return solve(params, u0, 10 * prof.T, opts, bc)


def _trace_deviation(params, prof, opts, tr=None):
    """Worst relative gap between the centre trace and ``beta (1 - t/T)^{-1/(m-1)}``."""
    tr = tr or _blowup_run(params, prof, opts)
    t = np.minimum(tr.step_times, prof.T * (1 - 1e-15))
    law = prof.beta * (1 - t / prof.T) ** (-1 / (params.m - 1))
    return {"max_dev": float(np.max(np.abs(tr.probe[1:] - law) / law)),
            "steps": int(tr.step_times.size)}


def exp_blowup(cfg, rng=None, threads=1):
    params = cfg.params
    m = params.m
    grid = cfg.grid.build(params)
    opts = _opts(cfg, bc_mode="dirichlet_separable")
    rep = ExperimentReport("blowup", cfg.echo())
    anchor = "pointwise blow-up at the profile horizon"
    betas = cfg.floats("betas", [0.5, 1.0, 2.0, 4.0])
    Ts = cfg.floats("horizons", [0.5, 1.0, 2.0])
    tol = cfg.number("T_tol", 0.1)
    cases = [(b, T) for T in Ts for b in betas]

    def one(case):
        beta, T = case
        prof = shoot_profile(params, beta, T, grid)
        tr = _blowup_run(params, prof, opts)
        ev = tr.blowup
        dev = _trace_deviation(params, prof, None, tr)["max_dev"]
        ell = ell_tail(prof.W, m).limit_estimate
        return {"beta": beta, "T": T, "T_fit": None if ev is None else ev["T_fit"],
                "ell": ell, "norm_1r": norm_1r(prof.W, m, cfg.norms.r).value,
                "trace_dev": dev, "steps": int(tr.step_times.size)}

    rows = pmap(one, cases, threads)
    T_err = [math.inf if r["T_fit"] is None else abs(r["T_fit"] - r["T"]) / r["T"] for r in rows]
    rep.check_le("worst relative error of the fitted blow-up time", anchor, max(T_err), tol)
    rep.measured["sweep_trace_dev"] = max(r["trace_dev"] for r in rows)
    # implicit Euler lags the separable law by a time shift of order dt, so
    # the trace check uses a finer step-change target than the sweep
    tb, tT = cfg.floats("trace_case", [1.0, 1.0])
    fine = _opts(cfg, bc_mode="dirichlet_separable", dt_init=1e-6,
                 change_target=cfg.number("trace_change_target", 0.002))
    tcase = _trace_deviation(params, shoot_profile(params, tb, tT, grid), fine)
    rep.measured["trace_case"] = {"beta": tb, "T": tT, **tcase}
    rep.check_le("centre trace against the separable law", "separable solution",
                 tcase["max_dev"], cfg.number("trace_tol", 0.05))
    prod = np.array([r["ell"] ** (m - 1) * r["T"] for r in rows])
    spread = float(prod.max() / prod.min()) if prod.min() > 0 else math.inf
    rep.measured.update(ell_T_bracket=[float(prod.min()), float(prod.max())],
                        ell_T_spread=spread)
    rep.check_le("spread of ell^{m-1} T across the sweep", "two-sided bound of T by ell(u0)",
                 spread, cfg.number("bracket_factor", 2.0))
    rep.table("sweep", {k: [r[k] if r[k] is not None else math.nan for r in rows]
                        for k in ("beta", "T", "T_fit", "ell", "norm_1r", "trace_dev", "steps")})

    # sandwich datum between two profiles with the same horizon
    b1, b2 = cfg.floats("sandwich_betas", [1.0, 2.0])
    T = cfg.number("sandwich_T", 1.0)
    p1, p2 = pmap(lambda b: shoot_profile(params, b, T, grid), [b1, b2], threads)
    mid = GridFunction(grid, 0.5 * (p1.W_samples + p2.W_samples))
    bc_mid = BoundaryData.separable(mid, T, m)
    tr = solve(params, mid, 10 * T, opts, bc_mid)
    ev = tr.blowup
    T_fit = math.nan if ev is None else ev["T_fit"]
    rep.check_in("sandwich datum fitted blow-up time", anchor, T_fit,
                 T * (1 - 1.5 * tol), T * (1 + 1.5 * tol))
    steps = tr.step_times
    forced = _opts(cfg, blowup_threshold=math.inf)

    def pinned(args):
        u0, bc = args
        return solve(params, u0, float(steps[-1]), forced, bc, output_times=steps,
                     step_times=steps).values()

    lo_v, mid_v, hi_v = pmap(pinned, [(p1.W, BoundaryData.separable(p1.W, T, m)),
                                      (mid, bc_mid),
                                      (p2.W, BoundaryData.separable(p2.W, T, m))], threads)
    scale = np.maximum(np.max(np.abs(mid_v), axis=1, keepdims=True), 1.0)
    viol = float(np.max(np.maximum(lo_v - mid_v, 0) / scale))
    viol = max(viol, float(np.max(np.maximum(mid_v - hi_v, 0) / scale)))
    rep.measured.update(sandwich_T_fit=T_fit, sandwich_steps=int(steps.size))
    rep.check_le("sandwich stays between the bounding separable runs",
                 "comparison with separable solutions", viol, 1e-9)
    return rep


# ---------------------------------------------------------------- smoothing

def _smoothing_run(cfg, u0, samples, decades):
    params = cfg.params
    m = params.m
    ex = derive_exponents(params)
    r = cfg.norms.r
    n1 = norm_1r(u0, m, r).value
    if not n1 > 0:
        raise DomainError("datum has zero norm; the smoothing ratio is undefined")
    Tr = existence_time(n1, m, cfg.C1)
    times = np.geomspace(Tr * 10.0**-decades, Tr, samples)
    tr = solve(params, u0, Tr, _opts(cfg, bc_mode="zero_flux", dt_init=Tr * 1e-5),
               output_times=times)
    keep = tr.times > 0
    t = tr.times[keep]
    c3 = tr.traces["norm_inf_r"][keep] * t ** ex.lambda1 / n1 ** (ex.theta * ex.lambda1)
    c2 = tr.traces["norm_1r"][keep] / n1
    return {"norm_1r": n1, "T_r": Tr, "C3": float(c3.max()), "C2": float(c2.max()),
            "finite": bool(np.all(np.isfinite(c3)) and np.all(np.isfinite(c2)))}


def exp_smoothing(cfg, rng=None, threads=1):
    params = cfg.params
    m = params.m
    rep = ExperimentReport("smoothing", cfg.echo())
    anchor = "smoothing estimate for data of finite norm"
    samples = cfg.number("samples", 21, int)
    decades = cfg.number("decades", 2.0)
    factor = cfg.number("refine", 2.0)
    ns = cfg.floats("truncations", [10, 20, 40])
    rate = growth_exponent(params.gamma, m)
    stab = cfg.number("stability_tol", 0.2)

    specs = [cfg.grid, refined(cfg.grid, factor)]
    grids = [s.build(params) for s in specs]

    def primary(grid):
        return build_datum(cfg, grid).u0

    def critical(grid, n):
        return truncate_datum(grid.sample(lambda y: y**rate), n)

    jobs = [("primary", 0, None), ("primary", 1, None)]
    jobs += [("critical", 0, n) for n in ns] + [("critical", 1, ns[len(ns) // 2])]

    def run(job):
        kind, gi, n = job
        u0 = primary(grids[gi]) if kind == "primary" else critical(grids[gi], n)
        return _smoothing_run(cfg, u0, samples, decades)

    res = pmap(run, jobs, threads)
    rep.check("ratios finite on every run", anchor, [r["finite"] for r in res], "all true",
              all(r["finite"] for r in res))

    def rel(a, b):
        return abs(a - b) / max(abs(a), abs(b))

    p0, p1 = res[0], res[1]
    crit = res[2:2 + len(ns)]
    cref = res[-1]
    mid = crit[len(ns) // 2]
    rep.check_le("C3 change under refinement, primary datum", anchor, rel(p0["C3"], p1["C3"]), stab)
    rep.check_le("C2 change under refinement, primary datum", anchor, rel(p0["C2"], p1["C2"]), stab)
    rep.check_le("C3 change under refinement, truncated critical datum", anchor,
                 rel(mid["C3"], cref["C3"]), stab)
    c3 = [r["C3"] for r in crit]
    c2 = [r["C2"] for r in crit]
    rep.check_le("C3 spread across truncation index", anchor, max(c3) / min(c3) - 1, stab)
    rep.check_le("C2 spread across truncation index", anchor, max(c2) / min(c2) - 1, stab)
    rep.measured.update(C3_primary=[p0["C3"], p1["C3"]], C2_primary=[p0["C2"], p1["C2"]],
                        C3_truncated=c3, C2_truncated=c2, C1=cfg.C1,
                        T_r=[r["T_r"] for r in res])
    rep.table("constants", {
        "datum": [j[0] for j in jobs], "M": [grids[j[1]].M for j in jobs],
        "n": [math.nan if j[2] is None else j[2] for j in jobs],
        "norm_1r": [r["norm_1r"] for r in res], "T_r": [r["T_r"] for r in res],
        "C3": [r["C3"] for r in res], "C2": [r["C2"] for r in res],
    })
    return rep


# ---------------------------------------------------------------- contraction and ordering

def random_bumps(grid, m, rng, count=3):
    """Sum of compactly supported bumps with random height, centre and width."""
    R = grid.R_max
    y = grid.nodes
    out = np.zeros_like(y)
    for _ in range(count):
        c = rng.uniform(0.2, 2.0)
        y0 = rng.uniform(0.0, R / 3)
        w = rng.uniform(0.5, R / 4)
        out += c * np.maximum(1.0 - ((y - y0) / w) ** 2, 0.0) ** (1.0 / (m - 1))
    return GridFunction(grid, out)


def exp_contraction_ordering(cfg, rng=None, threads=1):
    rng = rng if rng is not None else experiment_rng(SEED_DEFAULT, "contraction_ordering")
    params = cfg.params
    m = params.m
    grid = cfg.grid.build(params)
    ex = derive_exponents(params)
    alpha = cfg.norms.alpha or alpha_threshold(params.N, params.gamma, m) + 1.0
    phi = PhiAlpha(alpha)(grid.nodes)
    npairs = cfg.number("pairs", 20, int)
    t_end = cfg.t_end
    steps = np.geomspace(t_end * 1e-4, t_end, cfg.number("steps", 120, int))
    opts = _opts(cfg, bc_mode="zero_flux")
    rep = ExperimentReport("contraction_ordering", cfg.echo())
    rep.measured["alpha"] = alpha

    free = [(random_bumps(grid, m, rng), random_bumps(grid, m, rng)) for _ in range(npairs)]
    ordered = []
    for _ in range(npairs):
        u0 = random_bumps(grid, m, rng)
        ordered.append((u0, GridFunction(grid, u0.values + random_bumps(grid, m, rng, 2).values)))

    def run(u0):
        return solve(params, u0, t_end, opts, output_times=steps, step_times=steps)

    flat = [u for pair in free + ordered for u in pair]
    trs = pmap(run, flat, threads)
    pairs = list(zip(trs[0::2], trs[1::2]))
    times = trs[0].times

    factors, cfits, ord_viol, linf, mass_drift = [], [], [], [], []
    for k, (tu, tv) in enumerate(pairs):
        U, V = tu.values(), tv.values()
        d = np.array([weighted_l1(grid, a - b) for a, b in zip(U, V)])
        dphi = np.array([cumulative_integral(grid, np.abs(a - b) * phi)[-1] for a, b in zip(U, V)])
        if k < npairs:
            factors.append(float(np.max(d / d[0])))
            ratio = dphi[1:] / dphi[0]
            tpow = times[1:] ** (ex.theta * ex.lambda1)
            cfits.append(float(max(np.max(np.log(np.maximum(ratio, 1e-300)) / tpow), 0.0)))
        else:
            scale = max(float(np.max(np.abs(V))), 1.0)
            ord_viol.append(float(np.max(U - V)) / scale)
        for tr, W in ((tu, U), (tv, V)):
            top = float(np.max(np.abs(W[0])))
            linf.append((float(np.max(np.abs(W))) - top) / max(top, 1.0))
            mass = tr.traces["mass"]
            mass_drift.append(float(np.max(np.abs(mass - mass[0])) / abs(mass[0])))

    rep.check_le("worst weighted l1 contraction factor", "l1 contraction of solutions",
                 max(factors), 1 + 1e-6)
    rep.check_le("worst ordering violation over ordered pairs", "order preservation",
                 max(max(ord_viol), 0.0), 1e-10)
    rep.check_le("worst sup-norm growth on zero-flux runs", "sup-norm non-expansion",
                 max(max(linf), 0.0), 1e-9)
    rep.check_le("worst relative mass drift, compact data", "conservation of weighted mass",
                 max(mass_drift), 1e-6)
    rep.check("fitted c for the L1(Phi_alpha) dependence is finite",
              "weighted continuous dependence on data", max(cfits), "finite, >= 0",
              bool(np.isfinite(max(cfits))))
    rep.measured.update(contraction_factors=factors, c_fit=cfits, c_fit_max=max(cfits),
                        exponent=ex.theta * ex.lambda1)

    # identical runs are bit-identical, so every distance vanishes
    same = run(free[0][0]).values()
    rep.check("identical pair gives zero distance", "determinism of the scheme",
              float(np.max(np.abs(same - pairs[0][0].values()))), 0.0,
              bool(np.array_equal(same, pairs[0][0].values())))

    # ordered profiles with separable boundary data
    pgrid = GridSpec(cfg.number("profile_R_max", 50.0), cfg.number("profile_M", 400, int),
                     1.0).build(params)
    b1, b2 = cfg.floats("profile_betas", [1.0, 2.0])
    T = 1.0
    psteps = np.linspace(0, 0.9 * T, 91)[1:]
    ps = pmap(lambda b: shoot_profile(params, b, T, pgrid), [b1, b2], threads)
    runs = pmap(lambda p: solve(params, p.W, psteps[-1], _opts(cfg), BoundaryData.separable(
        p.W, T, m), output_times=psteps, step_times=psteps).values(), ps, threads)
    gap = float(np.min(runs[1] - runs[0]))
    rep.check("profile pair stays ordered", "ordering of profiles and of solutions",
              gap, {"min_exclusive": 0.0}, gap > 0)
    return rep


# ---------------------------------------------------------------- Benilan-Crandall

def bc_violation(times, values, m):
    """Worst decrease of ``t^{1/(m-1)} u`` between consecutive recorded times, scaled."""
    t = np.asarray(times)
    keep = t > 0
    q = t[keep, None] ** (1.0 / (m - 1)) * np.asarray(values)[keep]
    scale = max(float(np.max(np.abs(q))), 1e-300)
    drop = float(np.max(np.maximum(q[:-1] - q[1:], 0.0))) if len(q) > 1 else 0.0
    return drop / scale


def exp_bc_monotonicity(cfg, rng=None, threads=1):
    params = cfg.params
    m = params.m
    grid = cfg.grid.build(params)
    t_end = cfg.t_end
    out_t = np.geomspace(t_end * 1e-3, t_end, cfg.number("samples", 60, int))
    tol = cfg.number("tolerance", 1e-6)
    rate = growth_exponent(params.gamma, m)
    rep = ExperimentReport("bc_monotonicity", cfg.echo())
    anchor = "lower bound on u_t for nonnegative solutions"
    data = {
        "compact": compact_profile(grid, m, 1.0, 1.0, 1.0),
        "truncated_critical": truncate_datum(grid.sample(lambda y: y**rate), 10.0),
        "gaussian": grid.sample(lambda y: np.exp(-y**2)),
        "constant": grid.sample(lambda y: np.full_like(y, 2.0)),
    }

    def run(item):
        _, u0 = item
        tr = solve(params, u0, t_end, _opts(cfg, bc_mode="zero_flux"), output_times=out_t)
        return bc_violation(tr.times, tr.values(), m)

    viol = dict(zip(data, pmap(run, data.items(), threads)))
    for key, v in viol.items():
        rep.check_le(f"worst scaled violation, {key} datum", anchor, v, tol)
    if params.weight.is_pure_power:
        fam = ExplicitFamily(params, 1.0, 1.0 / 6.0)
        egrid = GridSpec(50.0, 400, 1.0).build(params)
        t_x = 0.5 * fam.T
        tr = solve(params, egrid.sample(fam.datum), t_x, _opts(cfg),
                   BoundaryData("dirichlet_explicit", family=fam),
                   output_times=np.geomspace(t_x * 1e-3, t_x, 40))
        v = bc_violation(tr.times, tr.values(), m)
        viol["explicit"] = v
        rep.check_le("worst scaled violation, explicit family", anchor, v, tol)
    rep.measured["violations"] = viol
    return rep


# ---------------------------------------------------------------- norms

def random_piecewise(grid, rng, rate):
    y = grid.nodes
    s = rng.uniform(0.0, rate)
    amp = np.exp(rng.normal(0.0, 1.0, size=y.size))
    return GridFunction(grid, amp * (1.0 + y) ** s)


def exp_norm_suite(cfg, rng=None, threads=1):
    rng = rng if rng is not None else experiment_rng(SEED_DEFAULT, "norm_suite")
    params = cfg.params
    m, N, g = params.m, params.N, params.gamma
    if not params.weight.is_pure_power:
        raise ConfigError("norm_suite closed forms need the pure power weight")
    grid = cfg.grid.build(params)
    rate = growth_exponent(g, m)
    sigma = sphere_area(N)
    rep = ExperimentReport("norm_suite", cfg.echo())
    anchor = "weighted uniformly local norms"
    trials = cfg.number("trials", 100, int)

    # closed forms for powers below or at the critical rate
    worst = 0.0
    closed = {}
    for s in cfg.floats("powers", [0.0, 0.5, 1.0]):
        if s > rate:
            continue
        f = grid.sample(lambda y: y**s)
        for r in (1.0, 2.0):
            exact = sigma * r ** (s - rate) / (s + N - g)
            got = norm_1r(f, m, r).value
            closed[f"s={s:g},r={r:g}"] = [got, exact]
            worst = max(worst, abs(got - exact) / exact)
    for r in (1.0, 2.0):
        got = norm_inf_r(grid.sample(np.ones_like), m, r).value
        worst = max(worst, abs(got - r**-rate) / r**-rate)
        f = grid.sample(lambda y: y**rate)
        worst = max(worst, abs(norm_inf_r(f, m, r).value - 1.0))
    rep.measured["closed_forms"] = closed
    rep.check_le("worst relative error of closed-form norms", anchor, worst, 0.005)

    rs = np.array([1.0, 2.0, 4.0])
    if grid.R_max < 4 * rs.max():
        raise ConfigError("norm_suite needs R_max >= 16")
    data = [random_piecewise(grid, rng, rate) for _ in range(trials)]

    def sandwich(f):
        worst_lo = worst_hi = -math.inf
        for p in (1.0, 2.0):
            for r in rs:
                plain = norm_pr(f, m, r, p).value
                cut = cutoff_norm_pr(f, m, r, p).value
                top = 2 ** (rate + (N - g) / p) * plain
                worst_lo = max(worst_lo, (plain - cut) / plain)
                worst_hi = max(worst_hi, (cut - top) / top)
        return max(worst_lo, worst_hi)

    sw = max(pmap(sandwich, data, threads))
    rep.check_le("equivalence sandwich, worst relative excess", anchor, sw, 1e-12)

    def mono(f):
        out = -math.inf
        for p in (1.0, 2.0, math.inf):
            vals = [norm_pr(f, m, r, p).value if p < math.inf else norm_inf_r(f, m, r).value
                    for r in rs]
            out = max(out, max((b - a) / a for a, b in zip(vals, vals[1:])))
        return out

    mo = max(pmap(mono, data, threads))
    rep.check_le("monotonicity in r, worst relative increase", anchor, max(mo, 0.0), 1e-12)

    def holder(f):
        out = -math.inf
        for p, q in ((1.0, 2.0), (2.0, math.inf), (1.0, math.inf)):
            c = holder_constant(grid, p, q)
            lhs = norm_pr(f, m, 1.0, p).value
            rhs = (norm_inf_r(f, m, 1.0).value if q == math.inf else norm_pr(f, m, 1.0, q).value)
            out = max(out, (lhs - c * rhs) / lhs)
        return out

    ho = max(pmap(holder, data, threads))
    rep.check_le("Hoelder chain, worst relative excess", "inclusions between the spaces",
                 max(ho, 0.0), 1e-12)

    alpha = cfg.norms.alpha or 3.0
    emb = [embedding_check(f, alpha, m) for f in
           [grid.sample(np.ones_like), grid.sample(lambda y: y**rate), data[0]]]
    slack = min(e.slack for e in emb)
    rep.measured.update(embedding_slack=[e.slack for e in emb], alpha=alpha)
    rep.check_ge("embedding into L1(Phi_alpha), smallest slack",
                 "continuous embedding into L1(Phi_alpha)", slack, 0.0)

    # truncation: convergence for ell = 0, none for critical growth
    ns = cfg.floats("truncations", [10, 20, 40, 80])
    trunc = {}
    for label, func in (("constant", np.ones_like), ("sqrt", np.sqrt),
                        ("critical", lambda y: y**rate)):
        f = grid.sample(func)
        dist = [norm_1r(GridFunction(grid, f.values - truncate(f, n).values), m).value for n in ns]
        grow = [norm_1r(truncate(f, n), m).value for n in ns]
        trunc[label] = {"distance": dist, "norm": grow, "full": norm_1r(f, m).value}
    conv = all(np.all(np.diff(trunc[k]["distance"]) < 0) and
               trunc[k]["distance"][-1] < 0.5 * trunc[k]["distance"][0]
               for k in ("constant", "sqrt"))
    rep.check("truncations converge for data with vanishing tail", "truncation in X_0",
              {k: trunc[k]["distance"] for k in ("constant", "sqrt")}, "strictly decreasing, "
              "last below half the first", conv)
    ell_crit = sigma / (rate + N - g)
    gap = min(trunc["critical"]["distance"]) / ell_crit
    rep.check_ge("critical growth stays at distance ell", "no truncation convergence outside X_0",
                 gap, 1 - 1e-3)
    lsc = all(np.all(np.diff(v["norm"]) >= -1e-12 * v["full"]) and v["norm"][-1] <= v["full"] *
              (1 + 1e-12) for v in trunc.values())
    rep.check("truncated norms increase towards the full norm", "lower semicontinuity",
              {k: v["norm"] for k, v in trunc.items()}, "nondecreasing, bounded", lsc)
    rep.measured["truncation"] = trunc

    tails = {k: ell_tail(grid.sample(f), m, tol=cfg.norms.ell_tol) for k, f in
             (("constant", np.ones_like), ("critical", lambda y: y**rate))}
    rep.check("tail classification", "the tail functional ell",
              {k: v.in_X0 for k, v in tails.items()}, {"constant": True, "critical": False},
              tails["constant"].in_X0 and not tails["critical"].in_X0)
    rep.measured["ell"] = {k: v.limit_estimate for k, v in tails.items()}

    lims = {}
    for k, f, want in (("critical", lambda y: y**rate, 1.0), ("constant", np.ones_like, 0.0),
                       ("oscillating", lambda y: y**rate + np.sin(y), 1.0)):
        rpt = limsup_rate(grid.sample(f), m)
        lims[k] = [rpt.norm_tail, rpt.far_field_ratio, want]
    lim_err = max(max(abs(a - b), abs(a - w)) for a, b, w in lims.values())
    rep.measured["limsup"] = lims
    rep.check_le("limsup identity, worst deviation", "limit of the sup norms", lim_err,
                 cfg.number("limsup_tol", 0.01))

    # exponent identity on random triples
    defect = 0.0
    for _ in range(cfg.number("exponent_trials", 1000, int)):
        pp = ProblemParams(int(rng.integers(3, 13)), float(rng.uniform(1.0, 6.0)) + 1e-9,
                           WeightSpec(float(rng.uniform(0.0, 2.0 - 1e-9))))
        defect = max(defect, abs(derive_exponents(pp).identity_defect))
    rep.check_le("exponent identity defect", "exponent algebra", defect, 1e-14)
    return rep


# ---------------------------------------------------------------- datum preparation

def exp_datum_preparation(cfg, rng=None, threads=1):
    """Zero-extended truncations versus far-field Dirichlet data for a growing datum."""
    params = cfg.params
    m = params.m
    grid = cfg.grid.build(params)
    prepared = build_datum(cfg, grid)
    if prepared.profile is None:
        raise ConfigError("datum_preparation needs a profile datum")
    prof = prepared.profile
    u0 = prepared.u0
    t_end = min(cfg.t_end, 0.5 * prof.T)
    out_t = np.linspace(0, t_end, 6)[1:]
    rep = ExperimentReport("datum_preparation", cfg.echo())
    ns = cfg.floats("truncations", [10, 20, 40])
    if max(ns) > 0.5 * grid.R_max:
        raise ConfigError("truncation radii must stay below R_max / 2")

    def run(n):
        if n is None:
            bc = BoundaryData.separable(u0, prof.T, m)
            return solve(params, u0, t_end, _opts(cfg), bc, output_times=out_t,
                         step_times=out_t_fine).values()[1:]
        return solve(params, truncate_datum(u0, n), t_end, _opts(cfg, bc_mode="zero_flux"),
                     output_times=out_t, step_times=out_t_fine).values()[1:]

    out_t_fine = np.linspace(0, t_end, cfg.number("steps", 200, int) + 1)[1:]
    res = pmap(run, [None] + list(ns), threads)
    ref = res[0]
    inner = grid.nodes <= cfg.number("inner_radius", 5.0)
    diffs = [float(np.max(np.abs(v[:, inner] - ref[:, inner]) / ref[:, inner])) for v in res[1:]]
    rep.measured.update(inner_rel_difference=dict(zip([f"n={n:g}" for n in ns], diffs)),
                        times=out_t)
    rep.check("both preparations complete", "truncation and far-field data", len(res),
              len(ns) + 1, all(np.all(np.isfinite(v)) for v in res))
    rep.table("difference", {"n": ns, "inner_rel_difference": diffs})
    return rep


# ---------------------------------------------------------------- calibration

def calibrate(cfg, rng=None, threads=1):
    """Bracket the existence constant C1 with blow-up sweeps.

    Every blowing-up datum gives ``C1 <= ||u0||_{1,r}^{m-1} T``; the report
    gives the smallest such product over the sweep and the closed-form
    value of the critical explicit datum.
    """
    params = cfg.params
    m = params.m
    r = cfg.norms.r
    grid = cfg.grid.build(params)
    rep = ExperimentReport("calibrate", cfg.echo())
    tol = cfg.number("T_tol", 0.1)
    betas = cfg.floats("betas", [0.5, 1.0, 2.0, 4.0])
    a_vals = cfg.floats("explicit_a", [0.25, 1.0, 4.0])

    def profile_case(beta):
        prof = shoot_profile(params, beta, 1.0, grid)
        tr = _blowup_run(params, prof, _opts(cfg))
        ev = tr.blowup
        return {"family": "profile", "param": beta, "T": 1.0,
                "T_fit": math.nan if ev is None else ev["T_fit"],
                "norm_1r": norm_1r(prof.W, m, r).value}

    def explicit_case(a):
        fam = ExplicitFamily(params, a, 1.0 / 6.0)
        egrid = GridSpec(cfg.grid.R_max, cfg.grid.M, cfg.grid.stretch).build(params)
        u0 = egrid.sample(fam.datum)
        tr = solve(params, u0, 10 * fam.T, _opts(cfg, blowup_probe="sup"),
                   BoundaryData("dirichlet_explicit", family=fam))
        ev = tr.blowup
        return {"family": "explicit", "param": a, "T": fam.T,
                "T_fit": math.nan if ev is None else ev["T_fit"],
                "norm_1r": norm_1r(u0, m, r).value}

    rows = pmap(profile_case, betas, threads)
    if params.weight.is_pure_power:
        rows += pmap(explicit_case, a_vals, threads)
    err = max(abs(x["T_fit"] - x["T"]) / x["T"] if np.isfinite(x["T_fit"]) else math.inf
              for x in rows)
    rep.check_le("worst relative error of fitted blow-up times", "blow-up at the known horizon",
                 err, tol)
    prods = [x["norm_1r"] ** (m - 1) * x["T_fit"] for x in rows]
    upper = min(prods)
    crit = critical_product(params) if params.weight.is_pure_power else math.inf
    c1_upper = min(upper, crit)
    rep.measured.update(products=prods, C1_upper_sweep=upper, C1_upper_critical=crit,
                        C1_upper=c1_upper, C1_in_use=cfg.C1, bracket=[min(prods), max(prods)])
    rep.check_le("configured C1 below every blow-up product", "existence time C1 / ||u0||^{m-1}",
                 cfg.C1, c1_upper)
    rep.table("sweep", {"family": [x["family"] for x in rows], "param": [x["param"] for x in rows],
                        "T": [x["T"] for x in rows], "T_fit": [x["T_fit"] for x in rows],
                        "norm_1r": [x["norm_1r"] for x in rows], "product": prods})
    return rep


# ---------------------------------------------------------------- registry

EXPERIMENTS = {
    "explicit_convergence": (exp_explicit_convergence, {
        "grid": {"R_max": "50", "M": "400", "stretch": "1.0"},
        "datum": {"kind": "explicit", "a": "1", "b": "0.16666666666666666"},
        "solver": {"t_end": "0.5", "bc_mode": "dirichlet_explicit"},
    }),
    "elliptic_profile": (exp_elliptic_profile, {
        "grid": {"R_max": "1000", "M": "2000", "stretch": "1.008"},
        "datum": {"kind": "profile", "beta": "1", "T": "1"},
    }),
    "blowup": (exp_blowup, {
        "grid": {"R_max": "200", "M": "600", "stretch": "1.005"},
        "datum": {"kind": "profile", "beta": "1", "T": "1"},
        "solver": {"bc_mode": "dirichlet_separable"},
    }),
    "contraction_ordering": (exp_contraction_ordering, {
        "grid": {"R_max": "20", "M": "200", "stretch": "1.0"},
        "solver": {"t_end": "1"},
    }),
    "bc_monotonicity": (exp_bc_monotonicity, {
        "grid": {"R_max": "100", "M": "400", "stretch": "1.005"},
        "solver": {"t_end": "1"},
    }),
    "smoothing": (exp_smoothing, {
        "grid": {"R_max": "200", "M": "400", "stretch": "1.005"},
        "datum": {"kind": "compact"},
    }),
    "norm_suite": (exp_norm_suite, {
        "grid": {"R_max": "1000", "M": "1200", "stretch": "1.006"},
        "norms": {"alpha": "3"},
    }),
    "datum_preparation": (exp_datum_preparation, {
        "grid": {"R_max": "200", "M": "600", "stretch": "1.005"},
        "datum": {"kind": "profile", "beta": "1", "T": "1"},
        "solver": {"t_end": "0.5", "bc_mode": "dirichlet_separable"},
    }),
    "calibrate": (calibrate, {
        "grid": {"R_max": "200", "M": "600", "stretch": "1.005"},
    }),
}


def experiment_config(name, path=None, out=None):
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    return load_config(path, name=name, defaults=EXPERIMENTS[name][1], out=out)


def run_experiment(name, cfg=None, seed=SEED_DEFAULT, threads=1):
    cfg = cfg or experiment_config(name)
    func = EXPERIMENTS[name][0]
    rep = func(cfg, experiment_rng(seed, name), threads)
    rep.inputs["seed"] = int(seed)
    return rep
