"""Acceptance criteria 1-12 at their stated tolerances.

Each test records one pass/fail line (printed and repeated in the terminal
summary) before asserting.  Monte Carlo campaigns use fixed master seeds.
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy import stats

from _acceptance_log import record
from spherefield.cli import main as cli_main
from spherefield.covariance import CovarianceModel, Dominating, classify_regime, dump_model
from spherefield.excursion import chaos_projections, m_functional
from spherefield.harness import (ExperimentConfig, composite_reference, correlation_summary,
                                 cumulant_trend, fit_variance_exponent, fourth_cumulant_diagnostic,
                                 run_experiment, second_chaos_kappa4, second_chaos_samples,
                                 slope_gap, standardized, test_distribution)
from spherefield.rosenblatt import (RosenblattParams, a2_closed, cumulant, kolmogorov_distance,
                                    sample_composite, sample_rosenblatt, sigma_and_a)
from spherefield.simulate import TimeGrid, simulate_field
from spherefield.special import (SphereQuadrature, gaunt3, gaunt_bound, gaunt_general, j_coefficient,
                                 legendre_all, zonal_gaunt)
from spherefield.variance import (appendix_bound_check, asymptotic_prediction, log_ratio_max,
                                  var_chaos, var_total)

LADDER = (64.0, 128.0, 256.0, 512.0, 1024.0)
LONG_LADDER = (1024.0, 2048.0, 4096.0, 8192.0, 16384.0)

MODEL_4 = CovarianceModel.from_shares({0: (0.05, 0.3), 1: (0.95, 0.8)})
MODEL_5 = CovarianceModel.from_shares({0: (0.1, 1.0, 2.0), 1: (0.9, 0.2)})
MODEL_6 = CovarianceModel.from_shares({0: (0.01, 1.0, 2.0), 2: (0.99, 0.2)})
MODEL_7 = CovarianceModel.from_shares({0: (0.5, 1.0, 2.0), 1: (0.5, 0.8)})
TWO_POLE = CovarianceModel.from_shares({0: (0.5, 0.3), 2: (0.5, 0.8)})


def var_se(x):
    """Delta-method standard error of the sample variance."""
    x = np.asarray(x)
    return float(np.std((x - x.mean()) ** 2, ddof=1) / math.sqrt(x.size))


# 1

def test_criterion_1_gaunt():
    t0 = time.perf_counter()
    quad = SphereQuadrature.gauss(30)
    worst = 0.0
    zeros_exact = True
    for a, b, c in itertools.product(range(11), repeat=3):
        g = gaunt3(a, b, c)
        worst = max(worst, abs(g - gaunt_general((a, b, c), quad)))
        forbidden = (a + b + c) % 2 or c > a + b or a > b + c or b > a + c
        if forbidden and g != 0.0:
            zeros_exact = False
    rng = np.random.default_rng(2024)
    bound_ok = 0
    for _ in range(500):
        q = int(rng.integers(3, 7))
        ells = [int(x) for x in rng.integers(0, 11, size=q)]
        if abs(zonal_gaunt(ells)) <= gaunt_bound(ells) * (1 + 1e-12):
            bound_ok += 1
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and zeros_exact and bound_ok == 500 and elapsed < 10
    record(1, ok, f"max |3j - quadrature| {worst:.1e}, selection zeros exact {zeros_exact}, "
                  f"bound {bound_ok}/500, {elapsed:.1f} s")
    assert ok


# 2

def tensor_quadrature_variance(model, u, T, q_max=3, n_time=64, degree=12):
    """sum_q (J_q^2/q!) int_{S2 x S2} int_{[0,T]^2} Gamma(<x,y>, t-s)^q by brute-force product rules.

    The time square is split at the diagonal; each triangle uses collapsed
    Gauss-Legendre coordinates so the kink of |t - s| sits on an edge.
    """
    sq = SphereQuadrature.gauss(degree)
    xyz = sq.unit_vectors()
    w = sq.weights()
    cos = np.clip(xyz @ xyz.T, -1.0, 1.0)
    ww = np.outer(w, w)
    x, wx = np.polynomial.legendre.leggauss(n_time)
    x, wx = 0.5 * (x + 1), 0.5 * wx
    a, b = np.meshgrid(x, x, indexing="ij")
    wa, wb = np.meshgrid(wx, wx, indexing="ij")
    t = T * a
    s = t * b
    jac = T * t * wa * wb  # dt ds = T * t da db
    taus = (t - s).ravel()
    tw = 2.0 * jac.ravel()  # both triangles
    pl = legendre_all(model.lmax, cos)
    coef = [(p.sigma2, p.ell, p) for p in model.multipoles]
    totals = {q: [] for q in range(1, q_max + 1)}
    for tau, wt in zip(taus, tw):
        gamma = sum(s2 * p.kernel(tau) * pl[ell] for s2, ell, p in coef)
        gq = np.ones_like(gamma)
        for q in range(1, q_max + 1):
            gq = gq * gamma
            totals[q].append(wt * float(np.sum(ww * gq)))
    out = 0.0
    for q in range(1, q_max + 1):
        j = float(j_coefficient(q, u))
        out += j * j / math.factorial(q) * math.fsum(totals[q])
    return out


def test_criterion_2_tensor_quadrature():
    t0 = time.perf_counter()
    u = 0.5
    rels = {}
    for T in (5.0, 20.0):
        exact = var_total(TWO_POLE, u, T, 3).total
        brute = tensor_quadrature_variance(TWO_POLE, u, T)
        rels[T] = abs(exact - brute) / exact
    elapsed = time.perf_counter() - t0
    ok = all(r < 1e-4 for r in rels.values()) and elapsed < 120
    record(2, ok, "rel. difference " + ", ".join(f"T={T:g}: {r:.1e}" for T, r in rels.items())
           + f", {elapsed:.0f} s")
    assert ok


# 3

def test_criterion_3_mc_vs_formula():
    t0 = time.perf_counter()
    T, u, R = 20.0, 0.5, 10000
    sphere = SphereQuadrature.gauss(15)
    grid = TimeGrid.from_dt(T, 0.25)
    M = np.empty(R)
    ch = np.empty((R, 3))
    for r in range(R):
        f = simulate_field(TWO_POLE, sphere, grid, 303, key=(0, r))
        M[r] = m_functional(f, u)
        p = chaos_projections(f, u, 3, with_residual=False)
        ch[r] = [p.values[1], p.values[2], p.values[3]]
    exact = var_total(TWO_POLE, u, T)
    z = {"M": (M.var(ddof=1) - exact.total) / var_se(M)}
    for q in (1, 2, 3):
        x = ch[:, q - 1]
        z[f"q={q}"] = (x.var(ddof=1) - var_chaos(TWO_POLE, u, q, T)) / var_se(x)
    elapsed = time.perf_counter() - t0
    ok = all(abs(v) <= 3 for v in z.values()) and elapsed < 600
    record(3, ok, "deviation in SE " + ", ".join(f"{k}: {v:+.2f}" for k, v in z.items())
           + f" (tail bound {exact.tail_bound / exact.total:.1e} of total), {elapsed:.0f} s")
    assert ok


# 4

def test_criterion_4_first_chaos():
    t0 = time.perf_counter()
    assert classify_regime(MODEL_4, 1.0).dominating is Dominating.FIRST
    cfg = ExperimentConfig(MODEL_4, (1.0,), LADDER, 1000, master_seed=4)
    tab = run_experiment(cfg, threads=4)
    fit = fit_variance_exponent(tab, 1.0)
    norm = test_distribution(standardized(tab, 1.0, LADDER[-1]), "normal")
    elapsed = time.perf_counter() - t0
    ok = abs(fit.slope - 1.7) <= 0.15 and norm.passed and elapsed < 600
    record(4, ok, f"slope {fit.slope:.3f} ± {fit.slope_se:.3f} (1.7±0.15), normality A2 "
                  f"{norm.statistic:.2f} <= {norm.threshold}: {norm.passed}, {elapsed:.0f} s")
    assert ok


# 5 and 9 share one campaign

@pytest.fixture(scope="module")
def campaign_5():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(MODEL_5, (1.0,), LONG_LADDER, 2000, master_seed=5, dt=1.0, ell_star=1)
    tab = run_experiment(cfg, threads=4)
    return tab, time.perf_counter() - t0


def test_criterion_5_rosenblatt_regime(campaign_5):
    tab, sim_time = campaign_5
    t0 = time.perf_counter()
    assert classify_regime(MODEL_5, 1.0).dominating is Dominating.SECOND
    fit = fit_variance_exponent(tab, 1.0)
    z = standardized(tab, 1.0, LONG_LADDER[-1])
    ks = test_distribution(z, composite_reference(MODEL_5, 1.0), n_perm=1000, seed=55)
    norm = test_distribution(z, "normal")
    elapsed = sim_time + time.perf_counter() - t0
    ok = abs(fit.slope - 1.6) <= 0.15 and ks.passed and not norm.passed and elapsed < 1200
    record(5, ok, f"slope {fit.slope:.3f} ± {fit.slope_se:.3f} (1.6±0.15), KS {ks.statistic:.4f} <= "
                  f"{ks.threshold:.4f}: {ks.passed}, normality rejected (A2 {norm.statistic:.1f}): "
                  f"{not norm.passed}, T={LONG_LADDER[-1]:g}, R=2000, {elapsed:.0f} s")
    assert ok


def test_criterion_9_monochromatic_correlation(campaign_5):
    tab, _ = campaign_5
    (res,) = correlation_summary(tab)
    ok = res.corr[-1] >= 0.9 and res.spearman == pytest.approx(1.0)
    record(9, ok, "corr " + ", ".join(f"{c:.4f}" for c in res.corr)
           + f" (exact {res.exact[-1]:.4f} at T={res.T[-1]:g}), Spearman {res.spearman:.2f}")
    assert ok


# 6

def test_criterion_6_berry_cancellation():
    t0 = time.perf_counter()
    assert classify_regime(MODEL_6, 0.0).exponent == pytest.approx(1.4)
    assert classify_regime(MODEL_6, 0.5).exponent == pytest.approx(1.6)
    cfg = ExperimentConfig(MODEL_6, (0.0, 0.5), LADDER, 1000, master_seed=6)
    tab = run_experiment(cfg, threads=4)
    f0 = fit_variance_exponent(tab, 0.0)
    f5 = fit_variance_exponent(tab, 0.5)
    gap = slope_gap(f5, f0)
    elapsed = time.perf_counter() - t0
    ok = (abs(f0.slope - 1.4) <= 0.15 and abs(f5.slope - 1.6) <= 0.15 and gap.exceeds(0.1)
          and elapsed < 1200)
    record(6, ok, f"u=0 slope {f0.slope:.3f} ± {f0.slope_se:.3f} (1.4±0.15), u=0.5 slope "
                  f"{f5.slope:.3f} ± {f5.slope_se:.3f} (1.6±0.15), gap {gap.gap:.3f}, one-sided 95% "
                  f"lower bound {gap.lower:.3f} > 0.1, {elapsed:.0f} s")
    assert ok


# 7

def test_criterion_7_short_memory_clt():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(MODEL_7, (0.0, 1.0), LADDER, 2000, master_seed=7)
    tab = run_experiment(cfg, threads=4)
    T_big = LADDER[-1]
    parts = []
    ok = True
    for u in (0.0, 1.0):
        assert classify_regime(MODEL_7, u).dominating is Dominating.ALL
        fit = fit_variance_exponent(tab, u)
        pred = asymptotic_prediction(MODEL_7, u)
        ratio = tab.samples(u, T_big).var(ddof=1) / T_big / pred.constant
        norm = test_distribution(standardized(tab, u, T_big), "normal")
        ok &= abs(fit.slope - 1.0) <= 0.15 and abs(ratio - 1) <= 0.10 and norm.passed
        parts.append(f"u={u:g}: slope {fit.slope:.3f} ± {fit.slope_se:.3f}, Var/T / sum s_q^2 "
                     f"{ratio:.3f} (tail {pred.tail_bound / pred.constant:.3f}), A2 {norm.statistic:.2f}")
    ests = [fourth_cumulant_diagnostic(second_chaos_samples(MODEL_7, T, 0.25, 40000, 77, u=1.0,
                                                       ladder_index=i, threads=4))
            for i, T in enumerate(LADDER)]
    trend = cumulant_trend(LADDER, ests)
    oracle = second_chaos_kappa4(MODEL_7, LADDER[0], 0.25)
    ok &= trend.decreasing and abs(ests[0].value - oracle) < 4 * ests[0].se
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 900
    parts.append("q=2 cum4 " + ", ".join(f"{e.value:.3f}" for e in ests)
                 + f" (exact {oracle:.3f} at T={LADDER[0]:g}), decreasing {trend.decreasing}")
    record(7, ok, "; ".join(parts) + f", {elapsed:.0f} s")
    assert ok


# 8

def test_criterion_8_asymptotic_constants():
    t0 = time.perf_counter()
    cases = [("4", MODEL_4, 1.0), ("5", MODEL_5, 1.0), ("6", MODEL_6, 0.0), ("6", MODEL_6, 0.5),
             ("7", MODEL_7, 0.0), ("7", MODEL_7, 1.0)]
    parts = []
    ok = True
    for name, model, u in cases:
        pred = asymptotic_prediction(model, u, q_max=7)
        ratios = [var_total(model, u, 2.0 ** k, 7).total / (pred.normalizer(2.0 ** k) * pred.constant)
                  for k in range(10, 15)]
        dev = [abs(r - 1) for r in ratios]
        conv = all(b <= a + 1e-12 for a, b in zip(dev, dev[1:]))
        ok &= dev[-1] <= 0.10 and conv
        parts.append(f"model {name} u={u:g}: {ratios[0]:.3f} -> {ratios[-1]:.3f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    record(8, ok, "var_total / (constant T^exp) at T=2^10 -> 2^14: " + "; ".join(parts)
           + f", {elapsed:.0f} s")
    assert ok


# 10

def test_criterion_10_rosenblatt_sampler():
    t0 = time.perf_counter()
    x = sample_rosenblatt(RosenblattParams(0.25), 100000, seed=10)
    n = x.size
    z_mean = x.mean() / (x.std() / math.sqrt(n))
    z_var = (x.var(ddof=1) - 1) / var_se(x)
    moments_ok = abs(z_mean) <= 4 and abs(z_var) <= 4
    kappa2 = [2 * sigma_and_a(b)[0] ** 2 * a2_closed(b) for b in (0.05, 0.15, 0.25, 0.35, 0.45)]
    kappa2_ok = all(abs(k - 1) < 1e-13 for k in kappa2)

    y = sample_rosenblatt(RosenblattParams(0.15), 200000, seed=11)
    k3 = stats.kstat(y, 3)
    groups = np.array_split(y, 40)
    jk = np.array([stats.kstat(np.concatenate(groups[:i] + groups[i + 1:]), 3) for i in range(40)])
    k3_se = math.sqrt(39 / 40 * np.sum((jk - jk.mean()) ** 2))
    k3_ref = cumulant(3, 0.15)
    k3_ok = abs(k3 - k3_ref) <= 3 * k3_se

    d_beta = [kolmogorov_distance(sample_rosenblatt(RosenblattParams(b), 100000, seed=12)) for b in (0.1, 0.25, 0.45)]
    beta_ok = d_beta[0] > d_beta[1] > d_beta[2]
    Ns = (3, 7, 15, 31)
    d_N = []
    for N in Ns:
        p = RosenblattParams(0.25, weights=(1 / math.sqrt(N),) * N)
        d_N.append(kolmogorov_distance(sample_composite(p, 100000, seed=13)))
    rho = stats.spearmanr([N ** -0.5 for N in Ns], d_N).statistic
    n_ok = all(a > b for a, b in zip(d_N, d_N[1:])) and rho > 0.9
    elapsed = time.perf_counter() - t0
    ok = moments_ok and kappa2_ok and k3_ok and beta_ok and n_ok and elapsed < 300
    record(10, ok, f"mean {z_mean:+.2f} SE, var {z_var:+.2f} SE; 2 sigma^2 a2 = 1 at 5 betas: {kappa2_ok}; "
                   f"kappa3 {k3:.3f} vs {k3_ref:.3f} ({(k3 - k3_ref) / k3_se:+.2f} SE); d_Kol in beta "
                   + ", ".join(f"{d:.3f}" for d in d_beta) + "; in N " + ", ".join(f"{d:.3f}" for d in d_N)
                   + f" (rank corr with N^-1/2 {rho:.2f}), {elapsed:.0f} s")
    assert ok


# 11

FAMILIES = ("short_memory_pair", "long_memory_pair", "long_memory_pair_off", "log_pair",
            "log_pair_off", "short_range_pair", "short_memory_tuple", "long_memory_tuple",
            "long_memory_tuple_off", "log_tuple", "log_tuple_off", "short_range_tuple",
            "zero_multipole")


def _admissible(family, rng):
    """(model, ells) for which `family` applies."""
    b0 = (1.0, float(rng.uniform(2, 4))) if rng.random() < 0.5 else (float(rng.uniform(0.05, 0.95)),)
    la, lb = (int(v) for v in rng.choice([1, 2, 3, 4], size=2, replace=False))
    q = int(rng.integers(3, 5))
    if family == "short_memory_pair":
        shares, ells = {la: (1.0, 1.0, float(rng.uniform(2, 4)))}, (la, la)
    elif family == "long_memory_pair":
        shares, ells = {la: (1.0, float(rng.uniform(0.05, 0.45)))}, (la, la)
    elif family == "long_memory_pair_off":
        bs = float(rng.uniform(0.05, 0.4))
        shares, ells = {la: (1.0, bs), lb: (1.0, float(rng.uniform(bs + 0.05, 0.99)))}, (lb, lb)
    elif family == "log_pair":
        shares, ells = {la: (1.0, 0.5)}, (la, la)
    elif family == "log_pair_off":
        shares, ells = {la: (1.0, 0.5), lb: (1.0, float(rng.uniform(0.55, 0.99)))}, (lb, lb)
    elif family == "short_range_pair":
        shares, ells = {la: (1.0, float(rng.uniform(0.55, 0.99)))}, (la, la)
    elif family == "short_memory_tuple":
        shares = {la: (1.0, float(rng.uniform(0.1, 0.9))), lb: (1.0, 1.0, float(rng.uniform(2, 4)))}
        ells = tuple(sorted([lb] + [int(v) for v in rng.choice([la, lb], size=q - 1)]))
    elif family == "long_memory_tuple":
        shares, ells = {la: (1.0, float(rng.uniform(0.02, 0.9 / q)))}, (la,) * q
    elif family == "long_memory_tuple_off":
        q = 3
        bs = float(rng.uniform(0.02, 0.3))
        shares = {la: (1.0, bs), lb: (1.0, float(rng.uniform(bs + 0.05, 0.99)))}
        ells = tuple(sorted([lb] + [int(v) for v in rng.choice([la, lb], size=q - 1)]))
    elif family == "log_tuple":
        shares, ells = {la: (1.0, 1.0 / q)}, (la,) * q
    elif family == "log_tuple_off":
        shares = {la: (1.0, 1.0 / q), lb: (1.0, float(rng.uniform(1.0 / q + 0.05, 0.99)))}
        ells = tuple(sorted([lb] + [la] * (q - 1)))
    elif family == "short_range_tuple":
        shares, ells = {la: (1.0, float(rng.uniform(1.0 / q + 0.05, 0.99)))}, (la,) * q
    else:  # zero_multipole
        shares = {la: (1.0, float(rng.uniform(0.1, 1.0)))}
        if shares[la][1] > 0.95:
            shares[la] = (1.0, 1.0, 2.5)
        ells = tuple(sorted([0] + [int(v) for v in rng.choice([0, la], size=int(rng.integers(1, 4)))]))
    spec = {0: (1.0,) + b0}
    spec.update(shares)
    w = rng.dirichlet(np.ones(len(spec)))
    spec = {ell: (float(wi),) + tuple(v[1:]) for (ell, v), wi in zip(spec.items(), w)}
    return CovarianceModel.from_shares(spec), ells


def test_criterion_11_appendix_bounds():
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    checked = 0
    failures = []
    seen = set()
    for i in range(100):
        family = FAMILIES[i % len(FAMILIES)]
        model, ells = _admissible(family, rng)
        M = float(rng.uniform(0.5, 5.0))
        eps = float(rng.uniform(0.01, 0.5))
        lo = max(M, 1.0) * 1.5 + 3.0
        bs = model.beta_star
        if bs is not None and bs < 0.5:
            lo = max(lo, 1.5 * log_ratio_max(bs)[1])
        T = float(np.exp(rng.uniform(np.log(lo), np.log(max(lo * 2, 2e4)))))
        reps = appendix_bound_check(model, ells, T, eps, M)
        names = {r.family for r in reps}
        seen |= names
        if family not in names:
            failures.append(f"{family} not applicable for {ells}")
        failures.extend(f"{r.family} {r.lhs:.4g} > {r.rhs:.4g}" for r in reps if not r.holds)
        checked += 1
    elapsed = time.perf_counter() - t0
    ok = not failures and seen >= set(FAMILIES) and elapsed < 120
    record(11, ok, f"{checked} tuples, {len(seen & set(FAMILIES))}/{len(FAMILIES)} families, "
                   f"{len(failures)} violations, {elapsed:.0f} s" + (f" [{failures[0]}]" if failures else ""))
    assert ok


# 12

def test_criterion_12_thread_determinism(tmp_path):
    (tmp_path / "model.toml").write_text(dump_model(MODEL_6))
    (tmp_path / "exp.toml").write_text(
        'name = "berry"\nmodel = "model.toml"\nlevels = [0.0, 0.5]\n'
        "T_ladder = [64.0, 128.0, 256.0, 512.0]\nreplications = 200\nmaster_seed = 6\nq_max = 3\n")
    outs = []
    for threads in (1, 4):
        d = tmp_path / f"t{threads}"
        cli_main(["mc", "--config", str(tmp_path / "exp.toml"), "--out-dir", str(d),
                  "--threads", str(threads)])
        outs.append({name: (d / name).read_bytes() for name in ("replicates.csv", "variances.csv")})
    same = outs[0] == outs[1]
    n_rows = outs[0]["replicates.csv"].count(b"\n") - 2
    record(12, same, f"--threads 1 vs 4: replicates.csv and variances.csv byte-identical: {same} "
                     f"({n_rows} rows)")
    assert same
