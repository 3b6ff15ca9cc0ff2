"""Exact and asymptotic variances of the chaotic components of M_T(u).

Var M_T(u)[q] = (4 pi J_q(u)^2 / q!) sum_{l_1..l_q} G(l) prod sqrt((2l_i+1)/(4pi)) k_l(T)

with G the integral of prod Y_{l_i,0} over the sphere and

k_l(T) = 2T int_0^T (1 - tau/T) prod C_{l_i}(tau) dtau.

For q = 1 this reads 4 pi phi(u)^2 k_0(T).
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from .covariance import Dominating, TIE_TOL, classify_regime
from .special import FOUR_PI, gaussian_phi_Phi, j_coefficient, zonal_gaunt

QUAD_EPSREL = 1e-10
QUAD_EPSABS = 1e-14


def _panels(T):
    """Geometric breakpoints 0, 1, 2, 4, ... , T."""
    edges = [0.0]
    x = 1.0
    while x < T:
        edges.append(x)
        x *= 2.0
    edges.append(float(T))
    return edges


def _quad(f, a, b):
    val, _ = integrate.quad(f, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
    return val


def _product_kernel(model, ells):
    parts = [model.get(ell) for ell in ells]
    scale = math.prod(p.c0 for p in parts)

    def f(tau):
        out = scale
        for p in parts:
            out = out * p.kernel(tau)
        return out

    return f, scale


def k_integral(model, ells, T):
    """k_l(T) = 2T int_0^T (1 - tau/T) prod_i C_{l_i}(tau) dtau."""
    if T <= 0:
        raise ValueError("T must be positive")
    f, scale = _product_kernel(model, ells)
    if scale == 0.0:
        return 0.0
    g = lambda t: (1.0 - t / T) * float(f(t))
    edges = _panels(T)
    return 2.0 * T * math.fsum(_quad(g, a, b) for a, b in zip(edges[:-1], edges[1:]))


def _infinite_integral(model, ells):
    """int_R prod C_{l_i}(tau) dtau (finite only for total decay > 1)."""
    f, scale = _product_kernel(model, ells)
    if scale == 0.0:
        return 0.0
    if model.has_default_kernels:
        b = sum(model.get(ell).decay for ell in ells)
        return 2.0 * scale / (b - 1.0)
    g = lambda t: float(f(t))
    edges = _panels(64.0)
    head = math.fsum(_quad(g, a, b) for a, b in zip(edges[:-1], edges[1:]))
    return 2.0 * (head + _quad(g, 64.0, np.inf))


def _support(model):
    return tuple(p.ell for p in model.multipoles if p.c0 > 0)


@lru_cache(maxsize=4096)
def _gaunt_terms(support, q):
    """[(multiset, weight)] with weight = multiplicity * G * prod sqrt((2l+1)/4pi)."""
    out = []
    for combo in itertools.combinations_with_replacement(support, q):
        g = zonal_gaunt(combo)
        if g == 0.0:
            continue
        mult = math.factorial(q)
        for c in Counter(combo).values():
            mult //= math.factorial(c)
        norm = math.prod(math.sqrt((2 * ell + 1) / FOUR_PI) for ell in combo)
        w = mult * g * norm
        if abs(w) > 0.0:
            out.append((combo, w))
    return tuple(out)


def chaos_prefactor(u, q):
    j = float(j_coefficient(q, u))
    return FOUR_PI * j * j / math.factorial(q)


def var_chaos(model, u, q, T):
    """Exact Var M_T(u)[q] for finite T."""
    if q < 1:
        raise ValueError("q must be at least 1")
    pref = chaos_prefactor(u, q)
    if pref == 0.0:
        return 0.0
    terms = [w * k_integral(model, combo, T) for combo, w in _gaunt_terms(_support(model), q)]
    return max(pref * math.fsum(terms), 0.0)


def j_tail(u, q_max):
    """sum_{q > q_max} J_q(u)^2/q!, via the exact total Phi(u)(1-Phi(u))."""
    _, tail = gaussian_phi_Phi(u)
    head = math.fsum(float(j_coefficient(q, u)) ** 2 / math.factorial(q)
                     for q in range(1, q_max + 1))
    return max(tail * (1.0 - tail) - head, 0.0)


def _gbar_integral(model, power, T=None):
    """2T int_0^T (1-tau/T) gbar^power, or 2 int_0^inf gbar^power if T is None."""
    g = lambda t: float(model.gbar(t)) ** power
    if T is None:
        edges = _panels(64.0)
        head = math.fsum(_quad(g, a, b) for a, b in zip(edges[:-1], edges[1:]))
        return 2.0 * (head + _quad(g, 64.0, np.inf))
    h = lambda t: (1.0 - t / T) * g(t)
    edges = _panels(T)
    return 2.0 * T * math.fsum(_quad(h, a, b) for a, b in zip(edges[:-1], edges[1:]))


@dataclass
class ChaosVarianceBreakdown:
    """Per-chaos variances; the true variance lies in [total, total + tail_bound]."""

    u: float
    T: float
    per_q: dict
    tail_bound: float
    total: float

    def rows(self):
        """(q, variance, share) for the nonzero chaoses, shares of total + tail."""
        denom = self.total + self.tail_bound
        out = []
        for q, v in self.per_q.items():
            if v == 0.0 and chaos_prefactor(self.u, q) == 0.0:
                continue
            out.append((q, v, v / denom if denom > 0 else 0.0))
        return out

    @property
    def tail_share(self):
        denom = self.total + self.tail_bound
        return self.tail_bound / denom if denom > 0 else 0.0


def var_total(model, u, T, q_max=7):
    """Chaos breakdown of Var M_T(u) truncated at q_max, with a rigorous tail bound.

    For q > q_max, |Gamma|^q <= gbar^(q_max+1) with gbar(tau) = sum_l sigma_l^2
    |C_l(tau)|/C_l(0), and sum_{q>q_max} J_q^2/q! is known exactly.
    """
    if q_max < 1:
        raise ValueError("q_max must be at least 1")
    per_q = {q: var_chaos(model, u, q, T) for q in range(1, q_max + 1)}
    jt = j_tail(u, q_max)
    tail = jt * FOUR_PI ** 2 * _gbar_integral(model, q_max + 1, T) if jt > 0 else 0.0
    return ChaosVarianceBreakdown(u, T, per_q, tail, math.fsum(per_q.values()))


# asymptotics

@dataclass(frozen=True)
class Rate:
    exponent: float
    log_power: int = 0

    def key(self):
        return (round(self.exponent, 12), self.log_power)

    def __call__(self, T):
        return T ** self.exponent * math.log(T) ** self.log_power


def _tuple_asymptotics(model, combo):
    """Leading term of k_combo(T): (Rate, constant)."""
    b = sum(model.get(ell).decay for ell in combo)
    c0 = math.prod(model.get(ell).c0 for ell in combo)
    if b < 1.0 - TIE_TOL:
        return Rate(2.0 - b), 2.0 * c0 / ((1.0 - b) * (2.0 - b))
    if b <= 1.0 + TIE_TOL:
        return Rate(1.0, 1), 2.0 * c0
    return Rate(1.0), _infinite_integral(model, combo)


@dataclass
class AsymptoticPrediction:
    """Var M_T(u) ~ constant * T^exponent (log T)^log_factor."""

    exponent: float
    log_factor: bool
    constant: float
    per_q: dict = field(default_factory=dict)
    tail_bound: float = 0.0

    @property
    def rate(self):
        return Rate(self.exponent, int(self.log_factor))

    def normalizer(self, T):
        return self.rate(T)


def chaos_asymptotics(model, u, q):
    """(Rate, constant) of Var M_T(u)[q], or None if the chaos vanishes."""
    pref = chaos_prefactor(u, q)
    if pref == 0.0:
        return None
    best = None
    acc = []
    for combo, w in _gaunt_terms(_support(model), q):
        rate, c = _tuple_asymptotics(model, combo)
        if best is None or rate.key() > best.key():
            best, acc = rate, [w * c]
        elif rate.key() == best.key():
            acc.append(w * c)
    if best is None:
        return None
    return best, pref * math.fsum(acc)


def asymptotic_prediction(model, u, regime=None, q_max=40):
    """Leading-order variance growth and constant for a non-boundary regime."""
    if regime is None:
        regime = classify_regime(model, u)
    if regime.dominating is Dominating.BOUNDARY:
        raise ValueError(f"boundary case not supported: {regime.diagnostic}")
    target = Rate(regime.exponent, int(regime.log_factor))
    per_q = {}
    for q in range(1, q_max + 1):
        res = chaos_asymptotics(model, u, q)
        if res is not None:
            per_q[q] = res
    top = max((r for r, _ in per_q.values()), key=Rate.key)
    if top.key() != target.key():
        raise RuntimeError(f"leading chaos rate {top} disagrees with regime {target}")
    const = math.fsum(c for r, c in per_q.values() if r.key() == target.key())
    tail = 0.0
    if target.key() == Rate(1.0).key():
        jt = j_tail(u, q_max)
        if jt > 0:
            tail = jt * FOUR_PI ** 2 * _gbar_integral(model, q_max + 1)
    consts = {q: c for q, (r, c) in per_q.items() if r.key() == target.key()}
    return AsymptoticPrediction(target.exponent, bool(target.log_power), const, consts, tail)


# monochromatic second chaos

def _mono_parts(model, ell, u):
    p = model.get(ell)
    sigma = math.sqrt(p.sigma2)
    if sigma <= 0:
        raise ValueError("multipole has zero variance")
    return p, sigma


def var_monochromatic(model, ell, u, T):
    """Exact Var m_{T;l}(u)."""
    p, sigma = _mono_parts(model, ell, u)
    dens, _ = gaussian_phi_Phi(u / sigma)
    k = k_integral(model, (ell, ell), T)
    return (u * dens) ** 2 / (2 * sigma ** 2) * FOUR_PI ** 2 / (2 * ell + 1) * k / p.c0 ** 2


def cov_monochromatic(model, ell, u, T):
    """Exact Cov(M_T(u), m_{T;l}(u)), carried by the second chaos only."""
    _, sigma = _mono_parts(model, ell, u)
    j2 = float(j_coefficient(2, u))
    j2s = float(j_coefficient(2, u / sigma))
    return (2 * ell + 1) * j2 * j2s / (2 * sigma ** 2) * k_integral(model, (ell, ell), T)


def corr_monochromatic(model, ell, u, T, q_max=7):
    """Exact Corr(M_T(u), m_{T;l}(u)) using the truncated total variance."""
    vt = var_total(model, u, T, q_max).total
    return cov_monochromatic(model, ell, u, T) / math.sqrt(vt * var_monochromatic(model, ell, u, T))


def monochromatic_limit(model, ell, u):
    """lim Var m_{T;l}(u) / T^(2-2 beta_l)."""
    p, sigma = _mono_parts(model, ell, u)
    b = p.beta
    dens, _ = gaussian_phi_Phi(u / sigma)
    return (u * dens) ** 2 / (2 * sigma ** 2) * FOUR_PI ** 2 / (2 * ell + 1) / ((1 - b) * (1 - 2 * b))


# dominating bounds

@dataclass
class BoundReport:
    family: str
    lhs: float
    rhs: float

    @property
    def holds(self):
        return self.lhs <= self.rhs * (1.0 + 1e-12)


def _int_tail(b, M, T=None):
    """int_M^T (1+tau)^(-b) dtau (T=None means infinity, needs b > 1)."""
    if T is None:
        return (1.0 + M) ** (1.0 - b) / (b - 1.0)
    if abs(b - 1.0) <= TIE_TOL:
        return math.log((1.0 + T) / (1.0 + M))
    return ((1.0 + T) ** (1.0 - b) - (1.0 + M) ** (1.0 - b)) / (1.0 - b)


@lru_cache(maxsize=256)
def log_ratio_max(beta_star):
    """(m, argmax) of log(1+x)/x^(1-2 beta_star) over x > 0."""
    p = 1.0 - 2.0 * beta_star
    f = lambda lx: -math.log1p(math.exp(lx)) / math.exp(p * lx)
    res = optimize.minimize_scalar(f, bounds=(-30.0, 60.0), method="bounded",
                                   options={"xatol": 1e-10})
    return -res.fun, math.exp(res.x)


def _check_sup(model, ells, eps, M):
    grid = np.concatenate([np.linspace(M, M + 10.0, 201), np.geomspace(M + 10.0, 1e8, 400)])
    for ell in set(ells):
        p = model.get(ell)
        if p.g_fn is None:
            continue
        dev = np.max(np.abs(np.asarray(p.g_fn(grid), dtype=float) - 1.0))
        if not dev < eps:
            raise ValueError(f"sup |g_fn - 1| on [M, inf) is {dev:.3g} >= eps for ell={ell}")


def appendix_bound_check(model, ells, T, eps, M):
    """Evaluate every applicable dominating bound on k_ells(T).

    Returns a list of BoundReport; an empty list means no family applies.
    """
    ells = tuple(sorted(int(e) for e in ells))
    if not T > max(1.0, M):
        raise ValueError("need T > max(1, M)")
    if not (eps > 0 and M > 0):
        raise ValueError("need eps > 0 and M > 0")
    _check_sup(model, ells, eps, M)
    q = len(ells)
    ps = [model.get(ell) for ell in ells]
    c0 = math.prod(p.c0 for p in ps)
    k = k_integral(model, ells, T)
    b0 = model.beta0
    bs = model.beta_star
    bss = model.beta_starstar
    istar = set(model.i_star)
    e1 = 1.0 + eps
    out = []
    long_mem = all(p.beta < 1.0 for p in ps)
    positive = all(ell >= 1 for ell in ells)
    in_istar = all(ell in istar for ell in ells)

    if q == 2 and ells[0] == ells[1]:
        p = ps[0]
        c2 = p.c0 ** 2
        if p.beta == 1.0:
            out.append(BoundReport("short_memory_pair", k / T,
                                   2 * c2 * (M + 2 * e1 ** 2 / (p.alpha - 1))))
        elif bs is not None and 2 * bs < 1 - TIE_TOL:
            norm = T ** (2 - 2 * bs)
            if p.ell in istar:
                out.append(BoundReport("long_memory_pair", k / norm,
                                       2 * c2 * (M + e1 ** 2 / (1 - 2 * bs) * (1 + 1 / M) ** (1 - 2 * bs))))
            elif p.ell >= 1 and bss is not None:
                m, t_m = log_ratio_max(bs)
                if T > t_m:
                    if abs(2 * bss - 1) <= TIE_TOL:
                        extra = 2 * m * e1 ** 2
                    elif 2 * bss < 1:
                        extra = e1 ** 2 / (1 - 2 * bss) * (1 + 1 / M) ** (1 - 2 * bss)
                    else:
                        extra = e1 ** 2 / (2 * bss - 1) * (1 / (1 + M)) ** (2 * bss - 1)
                    out.append(BoundReport("long_memory_pair_off", k / norm, 2 * c2 * (M + extra)))
        elif bs is not None and abs(2 * bs - 1) <= TIE_TOL and T > math.e:
            norm = T * math.log(T)
            if p.ell in istar:
                out.append(BoundReport("log_pair", k / norm,
                                       2 * c2 * (M + e1 ** 2 * math.log(math.e + 1))))
            elif p.ell >= 1 and bss is not None:
                out.append(BoundReport("log_pair_off", k / norm,
                                       2 * c2 * (M + e1 ** 2 * 2 / (2 * bss - 1))))
        elif bs is not None and 2 * bs > 1 + TIE_TOL and p.ell >= 1:
            out.append(BoundReport("short_range_pair", k / T,
                                   2 * c2 * (M + e1 ** 2 * 2 / (2 * bs - 1))))

    if any(p.beta == 1.0 for p in ps):
        mn = min(b0, bs) if bs is not None else b0
        out.append(BoundReport("short_memory_tuple", k / T,
                               2 * c0 * (M + (e1 / (1 + M) ** mn) ** q / (q * mn))))
    elif bs is not None and positive and long_mem:
        if q * bs < 1 - TIE_TOL:
            norm = T ** (2 - q * bs)
            if in_istar:
                out.append(BoundReport("long_memory_tuple", k / norm,
                                       2 * c0 * (M + e1 ** q / (1 - q * bs) * (1 + 1 / M) ** (1 - q * bs))))
            elif bss is not None:
                m, t_m = log_ratio_max(bs)
                if T > t_m:
                    b = bss + (q - 1) * bs
                    if abs(b - 1) <= TIE_TOL:
                        extra = 2 * e1 ** q * m
                    elif b < 1:
                        extra = e1 ** q / (1 - b) * (1 + 1 / M) ** (1 - b)
                    else:
                        extra = e1 ** q / (b - 1) * (1 / (M + 1)) ** (b - 1)
                    out.append(BoundReport("long_memory_tuple_off", k / norm, 2 * c0 * (M + extra)))
        elif abs(q * bs - 1) <= TIE_TOL:
            if T > math.e:
                norm = T * math.log(T)
                if in_istar:
                    out.append(BoundReport("log_tuple", k / norm,
                                           2 * c0 * (M + e1 ** q * math.log(math.e + 1))))
                elif bss is not None:
                    b = bss + (q - 1) * bs
                    out.append(BoundReport("log_tuple_off", k / norm,
                                           2 * c0 * (M + e1 ** q * 2 / (b - 1))))
        else:
            out.append(BoundReport("short_range_tuple", k / T,
                                   2 * c0 * (M + (1 + M) / (q * bs - 1) * (e1 / (1 + M) ** bs) ** q)))

    if 0 in ells:
        if bs is None or bs > b0:
            b = q * b0
        else:
            b = (q - 1) * bs + b0
        out.append(BoundReport("zero_multipole", k,
                               2 * T * c0 * (M + e1 ** q * _int_tail(b, M, T))))
    return out
