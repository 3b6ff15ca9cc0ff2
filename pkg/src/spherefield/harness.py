"""Replicated Monte Carlo experiments over a ladder of horizons.

A replication simulates one field on [0, T] and records, for every level u,
M_T(u), optionally its chaos projections 1..q_max and the monochromatic
second chaos m_{T;l*}(u).  Replications are independent (one RNG stream per
(T index, r, l, m)) so the table does not depend on how they are scheduled.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .covariance import Dominating, LimitLaw, ModelError, classify_regime, model_from_dict, load_model
from .excursion import chaos_projections, m_functional, m_monochromatic
from .rosenblatt import RosenblattParams, sample_composite
from .simulate import TimeGrid, _harmonics_for, _samplers, simulate_field, simulate_paths
from .special import FOUR_PI, SphereQuadrature, j_coefficient

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

AD_CRITICAL = {0.10: 1.933, 0.05: 2.492, 0.025: 3.070, 0.01: 3.857}
MIN_DIST_R = 200
MIN_CUMULANT_R = 1000
CHUNK = 16


@dataclass(frozen=True)
class ExperimentConfig:
    model: object
    levels: tuple
    T_ladder: tuple
    replications: int
    master_seed: int = 0
    dt: float = 0.25
    sphere_degree: int = 15
    q_max: int = 0
    ell_star: Optional[int] = None
    slope_tol: float = 0.15
    name: str = "experiment"

    def __post_init__(self):
        levels = tuple(float(u) for u in self.levels)
        ladder = tuple(float(t) for t in self.T_ladder)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "T_ladder", ladder)
        if not levels:
            raise ModelError("need at least one level u")
        if len(set(levels)) != len(levels):
            raise ModelError("levels must be distinct")
        if not ladder or any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise ModelError("T_ladder must be strictly increasing")
        if self.replications < 1:
            raise ModelError("replications must be positive")
        if not self.dt > 0:
            raise ModelError("dt must be positive")
        for T in ladder:
            TimeGrid.from_dt(T, self.dt)
        if self.sphere_degree < 2 * self.model.lmax:
            raise ModelError(f"sphere_degree {self.sphere_degree} below 2*lmax = {2 * self.model.lmax}")
        if self.q_max < 0:
            raise ModelError("q_max must be nonnegative")
        if self.ell_star is not None and self.ell_star not in self.model.ells:
            raise ModelError(f"ell_star={self.ell_star} is not a multipole of the model")

    @property
    def sphere(self):
        return SphereQuadrature.gauss(self.sphere_degree)

    def digest(self):
        parts = [self.model.digest(), repr(self.levels), repr(self.T_ladder),
                 str(self.replications), str(self.master_seed), repr(self.dt),
                 str(self.sphere_degree), str(self.q_max), repr(self.ell_star)]
        return "|".join(parts)


_CONFIG_KEYS = {"name", "model", "multipole", "levels", "T_ladder", "replications",
                "master_seed", "dt", "sphere_degree", "q_max", "ell_star", "slope_tol"}


def parse_config(text, source="<config>", base_dir="."):
    """Experiment config from TOML; the model is a file path or inline [[multipole]] tables."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ModelError(f"{source}: {exc}") from None
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ModelError(f"{source}: unknown keys {sorted(unknown)}")
    if ("model" in data) == ("multipole" in data):
        raise ModelError(f"{source}: give exactly one of `model` (path) or [[multipole]]")
    if "model" in data:
        model = load_model(os.path.join(base_dir, data["model"]))
    else:
        model = model_from_dict({"multipole": data["multipole"]}, source)
    for key in ("levels", "T_ladder", "replications"):
        if key not in data:
            raise ModelError(f"{source}: missing key `{key}`")
    kwargs = {k: data[k] for k in _CONFIG_KEYS - {"model", "multipole"} if k in data}
    try:
        return ExperimentConfig(model=model, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ModelError(f"{source}: {exc}") from None


def load_config(path):
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    return parse_config(text, str(path), os.path.dirname(os.path.abspath(path)))


@dataclass
class ReplicateTable:
    """Values indexed [u, T, r]; chaos has a trailing q axis (q = 1..q_max)."""

    config: ExperimentConfig
    M: np.ndarray
    chaos: np.ndarray
    mono: Optional[np.ndarray]

    def _iu(self, u):
        try:
            return self.config.levels.index(float(u))
        except ValueError:
            raise KeyError(f"level {u} not in table") from None

    def _it(self, T):
        try:
            return self.config.T_ladder.index(float(T))
        except ValueError:
            raise KeyError(f"T={T} not in table") from None

    def samples(self, u, T):
        return self.M[self._iu(u), self._it(T)]

    def chaos_samples(self, u, T, q):
        if not 1 <= q <= self.config.q_max:
            raise KeyError(f"chaos {q} not recorded")
        return self.chaos[self._iu(u), self._it(T), :, q - 1]

    def mono_samples(self, u, T):
        if self.mono is None:
            raise KeyError("monochromatic component not recorded")
        return self.mono[self._iu(u), self._it(T)]

    @property
    def header(self):
        cols = ["u", "T", "r", "M"] + [f"chaos_{q}" for q in range(1, self.config.q_max + 1)]
        if self.mono is not None:
            cols.append("m_mono")
        return cols

    def rows(self):
        """Rows ordered by (u, T, r)."""
        cfg = self.config
        for iu, u in enumerate(cfg.levels):
            for it, T in enumerate(cfg.T_ladder):
                for r in range(cfg.replications):
                    row = [u, T, r, float(self.M[iu, it, r])]
                    row.extend(float(x) for x in self.chaos[iu, it, r])
                    if self.mono is not None:
                        row.append(float(self.mono[iu, it, r]))
                    yield row

    def __len__(self):
        return self.M.size


def _replication(cfg, it, r, grid, sphere):
    field_ = simulate_field(cfg.model, sphere, grid, cfg.master_seed, key=(it, r))
    nu = len(cfg.levels)
    m = np.empty(nu)
    ch = np.zeros((nu, cfg.q_max))
    mono = np.empty(nu)
    for iu, u in enumerate(cfg.levels):
        m[iu] = m_functional(field_, u)
        if cfg.q_max:
            proj = chaos_projections(field_, u, cfg.q_max, with_residual=False)
            ch[iu] = [proj.values[q] for q in range(1, cfg.q_max + 1)]
        if cfg.ell_star is not None:
            mono[iu] = m_monochromatic(field_, cfg.ell_star, u)
    return m, ch, mono


def run_experiment(config, threads=1, progress=None):
    """Replicate table for every (u, T, r); identical for any thread count."""
    cfg = config
    nu, nt, R = len(cfg.levels), len(cfg.T_ladder), cfg.replications
    M = np.empty((nu, nt, R))
    chaos = np.zeros((nu, nt, R, cfg.q_max))
    mono = np.empty((nu, nt, R)) if cfg.ell_star is not None else None
    sphere = cfg.sphere
    _harmonics_for(cfg.model.ells, sphere)
    threads = max(1, int(threads or 1))

    for it, T in enumerate(cfg.T_ladder):
        grid = TimeGrid.from_dt(T, cfg.dt)
        _samplers(cfg.model, grid)  # warm the cache before workers start

        def work(chunk, it=it, T=T, grid=grid):
            out = []
            for r in chunk:
                try:
                    out.append(_replication(cfg, it, r, grid, sphere))
                except Exception as exc:
                    raise RuntimeError(f"replication failed at T={T}, r={r}: {exc}") from exc
            return chunk, out

        chunks = [range(a, min(a + CHUNK, R)) for a in range(0, R, CHUNK)]
        if threads == 1:
            results = map(work, chunks)
        else:
            pool = ThreadPoolExecutor(max_workers=threads)
            results = pool.map(work, chunks)
        try:
            for chunk, out in results:
                for r, (m, ch, mo) in zip(chunk, out):
                    M[:, it, r] = m
                    chaos[:, it, r] = ch
                    if mono is not None:
                        mono[:, it, r] = mo
        finally:
            if threads > 1:
                pool.shutdown(wait=True, cancel_futures=True)
        if progress:
            progress(T)
    return ReplicateTable(cfg, M, chaos, mono)


# exponent fits

def _groups(n, n_groups):
    g = max(2, min(n_groups, n))
    return np.array_split(np.arange(n), g)


def _ols(x, y):
    """(slope, intercept, r_squared, slope_se) of y on x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - intercept - slope * x
    ssr = float(np.sum(resid ** 2))
    sst = float(np.sum((y - ym) ** 2))
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    se = math.sqrt(ssr / (x.size - 2) / sxx) if x.size > 2 else math.nan
    return slope, intercept, r2, se


@dataclass
class VarianceFit:
    """log V = intercept + slope log T (V divided by log T when log_factor)."""

    slope: float
    slope_se: float
    intercept: float
    r_squared: float
    T: np.ndarray
    variance: np.ndarray
    variance_se: np.ndarray
    log_factor: bool = False
    jackknife: Optional[np.ndarray] = field(default=None, repr=False)

    def as_dict(self):
        return {
            "slope": self.slope, "slope_se": self.slope_se, "intercept": self.intercept,
            "r_squared": self.r_squared, "log_factor": self.log_factor,
            "T": list(map(float, self.T)), "variance": list(map(float, self.variance)),
            "variance_se": list(map(float, self.variance_se)),
        }


def _log_response(T, V, log_factor):
    y = np.log(V)
    if log_factor:
        y = y - np.log(np.log(T))
    return y


def fit_loglog(T, V, log_factor=False):
    """OLS fit on exact (T, V) pairs; SE from the regression residuals."""
    T = np.asarray(T, dtype=float)
    V = np.asarray(V, dtype=float)
    if T.size < 3 or np.any(V <= 0) or np.any(np.diff(T) <= 0):
        raise ValueError("degenerate ladder")
    slope, icpt, r2, se = _ols(np.log(T), _log_response(T, V, log_factor))
    return VarianceFit(slope, se, icpt, r2, T, V, np.zeros_like(V), log_factor)


def fit_variance_exponent(table, u, log_factor=False, n_groups=20):
    """Slope of log sample variance against log T, with a delete-group jackknife SE."""
    cfg = table.config
    if len(cfg.T_ladder) < 4:
        raise ValueError("degenerate ladder: need at least 4 horizons")
    if cfg.replications < 4:
        raise ValueError("need at least 4 replications")
    T = np.array(cfg.T_ladder)
    x = table.M[table._iu(u)]  # (nT, R)
    V = x.var(axis=1, ddof=1)
    if np.any(V <= 0):
        raise ValueError("zero sample variance")
    slope, icpt, r2, _ = _ols(np.log(T), _log_response(T, V, log_factor))
    groups = _groups(cfg.replications, n_groups)
    g = len(groups)
    jk = np.empty(g)
    jv = np.empty((g, T.size))
    for k, grp in enumerate(groups):
        keep = np.ones(cfg.replications, bool)
        keep[grp] = False
        jv[k] = x[:, keep].var(axis=1, ddof=1)
        jk[k] = _ols(np.log(T), _log_response(T, jv[k], log_factor))[0]
    se = math.sqrt((g - 1) / g * np.sum((jk - jk.mean()) ** 2))
    vse = np.sqrt((g - 1) / g * np.sum((jv - jv.mean(axis=0)) ** 2, axis=0))
    return VarianceFit(slope, se, icpt, r2, T, V, vse, log_factor, jk)


@dataclass
class SlopeGap:
    gap: float
    se: float
    lower: float  # one-sided 95% lower confidence bound

    def exceeds(self, threshold):
        return self.lower > threshold


def slope_gap(high, low):
    """high.slope - low.slope with a paired jackknife SE (same replication groups)."""
    if high.jackknife is None or low.jackknife is None or high.jackknife.size != low.jackknife.size:
        raise ValueError("fits must come from the same table")
    d = high.jackknife - low.jackknife
    g = d.size
    se = math.sqrt((g - 1) / g * np.sum((d - d.mean()) ** 2))
    gap = high.slope - low.slope
    return SlopeGap(gap, se, gap - stats.norm.ppf(0.95) * se)


# distribution tests

@dataclass
class DistributionTest:
    method: str
    statistic: float
    threshold: float
    passed: bool
    n: int
    alpha: float

    def as_dict(self):
        return {"method": self.method, "statistic": self.statistic, "threshold": self.threshold,
                "passed": bool(self.passed), "n": self.n, "alpha": self.alpha}


def anderson_darling_normal(x):
    """A^2 against the fully specified N(0, 1)."""
    z = np.sort(np.asarray(x, dtype=float))
    n = z.size
    i = np.arange(1, n + 1)
    s = stats.norm.logcdf(z) + stats.norm.logsf(z[::-1])
    return float(-n - np.sum((2 * i - 1) * s) / n)


def _ks_permutation_threshold(a, b, alpha, n_perm, seed):
    pooled = np.concatenate([a, b])
    order = np.argsort(pooled, kind="stable")
    n, na = pooled.size, a.size
    nb = n - na
    rng = np.random.default_rng(seed)
    stat = np.empty(n_perm)
    batch = 50
    for s in range(0, n_perm, batch):
        m = min(batch, n_perm - s)
        keys = rng.random((m, n))
        ranks = np.argsort(keys, axis=1)
        lab = ranks < na  # a random size-na subset per row
        ca = np.cumsum(lab[:, order], axis=1)
        pos = np.arange(1, n + 1)
        stat[s:s + m] = np.max(np.abs(ca / na - (pos - ca) / nb), axis=1)
    return float(np.quantile(stat, 1 - alpha))


def test_distribution(samples, reference="normal", reference_samples=None, variance=None,
                      alpha=0.01, n_perm=1000, seed=0, n_reference=20000):
    """Normal: Anderson-Darling A^2 with tabulated threshold.

    Composite (reference is RosenblattParams with weights): two-sample KS
    against reference draws, threshold from label permutations.
    """
    x = np.asarray(samples, dtype=float)
    if variance is not None:
        if not variance > 0:
            raise ValueError("variance must be positive to standardize")
        x = x / math.sqrt(variance)
    if x.size < 8:
        raise ValueError("too few samples")
    if isinstance(reference, str) and reference.lower() == "normal":
        if alpha not in AD_CRITICAL:
            raise ValueError(f"alpha must be one of {sorted(AD_CRITICAL)}")
        a2 = anderson_darling_normal(x)
        thr = AD_CRITICAL[alpha]
        return DistributionTest("anderson-darling", a2, thr, a2 <= thr, x.size, alpha)
    if not isinstance(reference, RosenblattParams):
        raise ValueError("reference must be 'normal' or RosenblattParams")
    if reference_samples is None:
        params = reference if reference.weights else RosenblattParams(
            reference.beta, reference.n_terms, reference.burn_in, (1.0,))
        reference_samples = sample_composite(params, n_reference, seed=seed + 1)
    y = np.asarray(reference_samples, dtype=float)
    d = float(stats.ks_2samp(x, y).statistic)
    thr = _ks_permutation_threshold(x, y, alpha, n_perm, seed)
    return DistributionTest("ks-permutation", d, thr, d <= thr, x.size, alpha)


test_distribution.__test__ = False  # not a pytest test


def composite_reference(model, u, n_terms=2 ** 16):
    """RosenblattParams of the second-chaos limit, signed by u."""
    from .covariance import theorem2_weights
    w = theorem2_weights(model).weights * math.copysign(1.0, u)
    return RosenblattParams(model.beta_star, n_terms, 0, tuple(w))


def standardized(table, u, T, q_max=7):
    from .variance import var_total
    v = var_total(table.config.model, u, T, q_max).total
    if not v > 0:
        raise ValueError("exact variance vanishes")
    return table.samples(u, T) / math.sqrt(v)


# correlation with the monochromatic component

@dataclass
class CorrelationResult:
    u: float
    T: np.ndarray
    corr: np.ndarray
    se: np.ndarray
    exact: np.ndarray
    spearman: float

    def as_dict(self):
        return {"u": self.u, "T": self.T.tolist(), "corr": self.corr.tolist(),
                "se": self.se.tolist(), "exact": self.exact.tolist(), "spearman": self.spearman}


def check_correlation_regime(config):
    if config.ell_star is None:
        raise ModelError("correlation experiment needs ell_star")
    for u in config.levels:
        rep = classify_regime(config.model, u)
        if rep.dominating is not Dominating.SECOND or rep.limit_law is not LimitLaw.ROSENBLATT:
            raise ModelError(f"u={u}: regime {rep.dominating.value}, need SecondChaos")
        if len(rep.I_star) != 1:
            raise ModelError(f"I* = {rep.I_star} is not a single multipole")
        if rep.I_star[0] != config.ell_star:
            raise ModelError(f"ell_star={config.ell_star} but I* = {rep.I_star}")


def correlation_summary(table):
    """Pearson correlation of M_T(u) with m_{T;l*}(u) per T, Fisher-z SE."""
    from .variance import corr_monochromatic
    cfg = table.config
    check_correlation_regime(cfg)
    R = cfg.replications
    if R < 4:
        raise ValueError("need at least 4 replications")
    out = []
    T = np.array(cfg.T_ladder)
    for u in cfg.levels:
        c = np.array([np.corrcoef(table.samples(u, t), table.mono_samples(u, t))[0, 1] for t in T])
        se = (1 - c ** 2) / math.sqrt(R - 3)
        exact = np.array([corr_monochromatic(cfg.model, cfg.ell_star, u, t) for t in T])
        rho = float(stats.spearmanr(T, c).statistic) if T.size > 1 else math.nan
        out.append(CorrelationResult(u, T, c, se, exact, rho))
    return out


def correlation_experiment(config, threads=1):
    check_correlation_regime(config)
    return correlation_summary(run_experiment(config, threads))


# fourth cumulant

@dataclass
class CumulantEstimate:
    q: int
    value: float
    se: float


def fourth_cumulant_diagnostic(samples, q=2, n_groups=20):
    """Standardized fourth cumulant k4/k2^2 (k-statistics), jackknife SE."""
    if q < 2:
        raise ValueError("q must be at least 2")
    x = np.asarray(samples, dtype=float)
    if x.size < MIN_CUMULANT_R:
        raise ValueError(f"need at least {MIN_CUMULANT_R} replications, got {x.size}")

    def est(v):
        return stats.kstat(v, 4) / stats.kstat(v, 2) ** 2

    value = float(est(x))
    groups = _groups(x.size, n_groups)
    g = len(groups)
    jk = np.empty(g)
    for k, grp in enumerate(groups):
        jk[k] = est(np.delete(x, grp))
    se = math.sqrt((g - 1) / g * np.sum((jk - jk.mean()) ** 2))
    return CumulantEstimate(q, value, se)


def second_chaos_from_paths(paths, u, dt):
    """M_T(u)[2] from coefficient paths: (J_2/2) dt sum_k (sum_lm a_lm(t_k)^2 - 4 pi)."""
    j2 = float(j_coefficient(2, u))
    s = np.sum(paths.values ** 2, axis=0) - FOUR_PI
    return 0.5 * j2 * dt * float(np.sum(s))


def second_chaos_samples(model, T, dt, replications, master_seed, u=1.0, ladder_index=0, threads=1):
    """Second-chaos draws without synthesizing the field (exact sphere integral)."""
    grid = TimeGrid.from_dt(T, dt)
    _samplers(model, grid)
    out = np.empty(replications)

    def work(chunk):
        for r in chunk:
            paths = simulate_paths(model, grid, master_seed, key=(ladder_index, r))
            out[r] = second_chaos_from_paths(paths, u, grid.dt)

    chunks = [range(a, min(a + 4 * CHUNK, replications)) for a in range(0, replications, 4 * CHUNK)]
    threads = max(1, int(threads or 1))
    if threads == 1:
        for c in chunks:
            work(c)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, chunks))
    return out


def second_chaos_kappa4(model, T, dt):
    """Exact standardized fourth cumulant of the discretized second chaos.

    The sphere integral of H_2(Z) is sum_lm a_lm^2 - 4 pi, a quadratic form
    in independent Gaussian paths, so kappa_j = 2^(j-1) (j-1)! sum_l (2l+1) tr S_l^j
    with S_l the Toeplitz covariance of one path.
    """
    from scipy.linalg import eigvalsh, toeplitz
    grid = TimeGrid.from_dt(T, dt)
    lags = np.arange(grid.n_steps) * grid.dt
    t2 = t4 = 0.0
    for p in model.multipoles:
        lam = eigvalsh(toeplitz(model.c_ell(p.ell, lags)))
        t2 += (2 * p.ell + 1) * float(np.sum(lam ** 2))
        t4 += (2 * p.ell + 1) * float(np.sum(lam ** 4))
    return 48.0 * t4 / (2.0 * t2) ** 2


@dataclass
class CumulantTrend:
    T: np.ndarray
    estimates: list
    spearman: float
    drop: float  # first minus last estimate
    drop_se: float

    @property
    def decreasing(self):
        """Rank trend negative and the overall drop positive beyond 2 SE."""
        return self.spearman < 0 and self.drop > 2 * self.drop_se


def cumulant_trend(T, estimates):
    T = np.asarray(T, dtype=float)
    vals = np.array([e.value for e in estimates])
    rho = float(stats.spearmanr(T, np.abs(vals)).statistic)
    drop = abs(vals[0]) - abs(vals[-1])
    se = math.hypot(estimates[0].se, estimates[-1].se)
    return CumulantTrend(T, list(estimates), rho, drop, se)


# campaign summary

def summarize(table, n_perm=1000, q_var=7):
    """Predicted vs fitted exponents and limit-law tests at the largest T."""
    from .variance import asymptotic_prediction, var_total
    cfg = table.config
    T_big = cfg.T_ladder[-1]
    out = {"name": cfg.name, "largest_T": T_big, "replications": cfg.replications,
           "levels": [], "passed": True}
    for u in cfg.levels:
        rep = classify_regime(cfg.model, u)
        entry = {"u": u, "regime": rep.as_dict(), "checks": []}
        ok = True
        if rep.dominating is Dominating.BOUNDARY:
            entry["checks"].append({"name": "regime", "passed": False, "detail": rep.diagnostic})
            ok = False
        if len(cfg.T_ladder) >= 4 and cfg.replications >= 4:
            fit = fit_variance_exponent(table, u, log_factor=rep.log_factor)
            entry["fit"] = fit.as_dict()
            if rep.dominating is not Dominating.BOUNDARY:
                passed = abs(fit.slope - rep.exponent) <= cfg.slope_tol
                entry["checks"].append({
                    "name": "slope", "predicted": rep.exponent, "fitted": fit.slope,
                    "se": fit.slope_se, "tolerance": cfg.slope_tol, "passed": passed,
                    "line": f"slope {rep.exponent:g}±{cfg.slope_tol:g}: "
                            f"{'PASS' if passed else 'FAIL'} (fitted {fit.slope:.3f} ± {fit.slope_se:.3f})"})
                ok &= passed
        else:
            entry["fit"] = None
            entry["checks"].append({"name": "slope", "skipped": "fewer than 4 horizons or replications"})
        exact = var_total(cfg.model, u, T_big, q_var)
        entry["exact_variance"] = exact.total
        entry["exact_tail_bound"] = exact.tail_bound
        if exact.total > 0 and cfg.replications >= MIN_DIST_R and rep.dominating is not Dominating.BOUNDARY:
            z = table.samples(u, T_big) / math.sqrt(exact.total)
            if rep.limit_law is LimitLaw.GAUSSIAN:
                t = test_distribution(z, "normal")
                entry["checks"].append({"name": "normality", **t.as_dict()})
                ok &= t.passed
            elif rep.limit_law is LimitLaw.ROSENBLATT:
                t = test_distribution(z, composite_reference(cfg.model, u), n_perm=n_perm,
                                      seed=cfg.master_seed)
                entry["checks"].append({"name": "composite_rosenblatt", **t.as_dict()})
                ok &= t.passed
        elif cfg.replications < MIN_DIST_R:
            entry["checks"].append({"name": "distribution", "skipped": f"R < {MIN_DIST_R}"})
        if rep.dominating is not Dominating.BOUNDARY:
            pred = asymptotic_prediction(cfg.model, u, rep)
            entry["asymptotic_constant"] = pred.constant
        entry["passed"] = bool(ok)
        out["levels"].append(entry)
        out["passed"] = out["passed"] and bool(ok)
    return out
