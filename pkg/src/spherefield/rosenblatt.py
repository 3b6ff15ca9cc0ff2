"""Standard and composite Rosenblatt laws.

The finite-n approximation is S_n = sum_{k<n} H_2(xi_k) / sd, with xi a
stationary standard Gaussian sequence of autocovariance r(k) = (1+k)^-beta.
Writing R for the n x n Toeplitz matrix [r(j-k)],

    sum_k H_2(xi_k) = sum_i lambda_i (W_i^2 - 1),   lambda_i eigenvalues of R,

so the default sampler keeps the top eigenvalues exactly and replaces the
rest by a Gaussian with the exact remaining variance.  The normalization
sd^2 = 2 tr(R^2) is exact, not estimated.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import linalg, special, stats

from .simulate import StationarySampler, TimeGrid, stream

DENSE_MAX = 2048
N_BLOCKS = 2048
KEEP = 400
BLOCK = 4096


def sigma_and_a(beta):
    """sigma(beta) = sqrt((1-2b)(1-b)/2) and the printed a(beta)."""
    if not 0.0 < beta < 0.5:
        raise ValueError(f"beta={beta} outside (0, 1/2)")
    sigma = math.sqrt(0.5 * (1 - 2 * beta) * (1 - beta))
    a = sigma / (2 * math.gamma(beta) * math.sin((1 - beta) * math.pi / 2))
    return sigma, a


def a2_closed(beta):
    return 2.0 / ((1 - 2 * beta) * (2 - 2 * beta))


def _cycle_gap_sets(j):
    """For each cycle order (starting at 0) the list of gap-index sets of its edges."""
    out = []
    for rest in itertools.permutations(range(1, j)):
        order = (0,) + rest
        edges = []
        for a, b in zip(order, order[1:] + order[:1]):
            lo, hi = min(a, b), max(a, b)
            edges.append(frozenset(range(lo, hi)))  # gaps lo..hi-1
        out.append(edges)
    return out


def _gauss_jacobi01(n, a, b):
    """Nodes/weights on [0,1] for weight s^a (1-s)^b."""
    x, w = special.roots_jacobi(n, b, a)
    return 0.5 * (1 + x), w / 2.0 ** (1 + a + b)


def _simplex_integral(j, beta, n):
    """sum over cycle orders of int over the gap simplex of prod dist^-beta."""
    cycles = _cycle_gap_sets(j)
    total = []
    if j == 3:
        # gaps (s, 1-s)
        for edges in cycles:
            ea = sum(1 for e in edges if e == frozenset({0}))
            eb = sum(1 for e in edges if e == frozenset({1}))
            s, w = _gauss_jacobi01(n, -beta * ea, -beta * eb)
            total.append(float(np.sum(w)))  # remaining factors are the full length 1
        return math.fsum(total)
    if j == 4:
        # gaps (s, (1-s) t, (1-s)(1-t)), Jacobian (1-s)
        for edges in cycles:
            n_s0 = sum(1 for e in edges if e == frozenset({0}))
            n_s1 = sum(1 for e in edges if e and e <= frozenset({1, 2}))
            n_t0 = sum(1 for e in edges if e == frozenset({1}))
            n_t1 = sum(1 for e in edges if e == frozenset({2}))
            s, ws = _gauss_jacobi01(n, -beta * n_s0, 1.0 - beta * n_s1)
            t, wt = _gauss_jacobi01(n, -beta * n_t0, -beta * n_t1)
            S, Tt = np.meshgrid(s, t, indexing="ij")
            gaps = [S, (1 - S) * Tt, (1 - S) * (1 - Tt)]
            resid = np.ones_like(S)
            for e in edges:
                if e == frozenset({0, 1}):  # s + (1-s) t, singular only at a corner
                    resid = resid * (gaps[0] + gaps[1]) ** (-beta)
            total.append(float(ws @ resid @ wt))
        return math.fsum(total)
    raise ValueError("quadrature route only for j = 3, 4")


def a_j_quadrature(j, beta, n=96):
    """a_j by Gauss-Jacobi tensor rules on the gap simplex (j = 2, 3, 4)."""
    if j == 2:
        return a2_closed(beta)
    radial = 1.0 / ((j - 1 - j * beta) * (j - j * beta))
    return j * radial * _simplex_integral(j, beta, n)


def a3_closed(beta):
    """6 B(1-b, 1-b) / ((2-3b)(3-3b))."""
    return 6.0 * special.beta(1 - beta, 1 - beta) / ((2 - 3 * beta) * (3 - 3 * beta))


def a_j_monte_carlo(j, beta, n_samples=10 ** 6, seed=0):
    """(estimate, standard error) of E prod_cyc |U_i - U_{i+1}|^-beta."""
    rng = stream(seed, 7, j)
    acc = []
    left = n_samples
    while left > 0:
        m = min(left, 200000)
        u = rng.random((m, j))
        d = np.abs(u - np.roll(u, -1, axis=1))
        acc.append(np.prod(d ** (-beta), axis=1))
        left -= m
    x = np.concatenate(acc)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


@dataclass
class ACoefficient:
    value: float
    se: float
    method: str


def a_j_coefficient(j, beta, n_mc=10 ** 6, seed=0):
    """Cyclic integral a_j over [0,1]^j."""
    if j < 2:
        raise ValueError("j must be at least 2")
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if j == 2:
        return ACoefficient(a2_closed(beta), 0.0, "closed")
    if j <= 4:
        if j * beta >= j - 1:
            raise ValueError("integral diverges")
        return ACoefficient(a_j_quadrature(j, beta), 0.0, "quadrature")
    val, se = a_j_monte_carlo(j, beta, n_mc, seed)
    return ACoefficient(val, se, "monte_carlo")


def cumulant(j, beta):
    """kappa_j = (1/2) (2 sigma)^j a_j (j-1)!; kappa_2 = 1."""
    sigma, _ = sigma_and_a(beta)
    return 0.5 * (2 * sigma) ** j * a_j_coefficient(j, beta).value * math.factorial(j - 1)


@dataclass(frozen=True)
class RosenblattParams:
    """beta in (0, 1/2); n_terms of the approximating sum; optional weights.

    burn_in only affects the circulant route (leading terms dropped).
    """

    beta: float
    n_terms: int = 2 ** 16
    burn_in: int = 0
    weights: Optional[tuple] = None

    def __post_init__(self):
        if not 0.0 < self.beta < 0.5:
            raise ValueError(f"beta={self.beta} outside (0, 1/2)")
        if self.n_terms < 2 or self.burn_in < 0:
            raise ValueError("need n_terms >= 2 and burn_in >= 0")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.size == 0 or not np.all(np.isfinite(w)) or not np.any(w != 0):
                raise ValueError("weights must be finite and not all zero")
            object.__setattr__(self, "weights", tuple(float(x) for x in w))


def _autocov(beta, n):
    return (1.0 + np.arange(n)) ** (-beta)


def toeplitz_trace_sq(beta, n):
    r = _autocov(beta, n)
    k = np.arange(1, n)
    return float(n * r[0] ** 2 + 2.0 * np.sum((n - k) * r[1:] ** 2))


@lru_cache(maxsize=32)
def toeplitz_spectrum(beta, n, keep=KEEP):
    """(top eigenvalues, remaining sum of squares, tr R^2) of R = [(1+|j-k|)^-beta].

    Exact dense eigenvalues up to DENSE_MAX; beyond, Rayleigh-Ritz on the
    span of block indicators (lower bounds by interlacing).
    """
    tr2 = toeplitz_trace_sq(beta, n)
    if n <= DENSE_MAX:
        lam = linalg.eigvalsh(linalg.toeplitz(_autocov(beta, n)))
    else:
        nb = N_BLOCKS
        while n % nb:
            nb //= 2
        b = n // nb
        delta = np.arange(-(b - 1), b)
        tri = (b - np.abs(delta)).astype(float)
        d = np.arange(nb)[:, None] * b + delta[None, :]
        col = ((1.0 + np.abs(d)) ** (-beta)) @ tri / b
        lam = linalg.eigvalsh(linalg.toeplitz(col))
    lam = np.sort(lam)[::-1]
    top = lam[: min(keep, lam.size)].copy()
    rest = max(tr2 - float(np.sum(top ** 2)), 0.0)
    return top, rest, tr2


def _grouped(weights):
    """Distinct weights with multiplicities, in first-seen order."""
    groups = {}
    for w in weights:
        groups[w] = groups.get(w, 0) + 1
    return list(groups.items())


def _spectral_block(top, rest, sd, groups, rng, m):
    out = np.zeros(m)
    for w, mult in groups:
        if mult == 1:
            z = rng.standard_normal((m, top.size))
            chi = z * z - 1.0
        else:
            chi = rng.chisquare(mult, size=(m, top.size)) - mult
        g = rng.standard_normal(m) * math.sqrt(2.0 * mult * rest)
        out += w * (chi @ top + g) / sd
    return out


def _sample(params, n_samples, seed, weights, method):
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if method == "circulant":
        return _sample_circulant(params, n_samples, seed, weights)
    top, rest, tr2 = toeplitz_spectrum(params.beta, params.n_terms)
    sd = math.sqrt(2.0 * tr2)
    groups = _grouped(weights)
    blocks = []
    done = 0
    b = 0
    while done < n_samples:
        m = min(BLOCK, n_samples - done)
        blocks.append(_spectral_block(top, rest, sd, groups, stream(seed, 11, b), m))
        done += m
        b += 1
    return np.concatenate(blocks)


def _sample_circulant(params, n_samples, seed, weights):
    n = params.n_terms + params.burn_in
    sampler = StationarySampler(lambda t: (1.0 + np.abs(t)) ** (-params.beta), TimeGrid(float(n), n))
    sd = math.sqrt(2.0 * toeplitz_trace_sq(params.beta, params.n_terms))
    out = np.empty(n_samples)
    for i in range(n_samples):
        rng = stream(seed, 13, i)
        acc = 0.0
        for w in weights:
            xi = sampler.sample(rng)[params.burn_in:]
            acc += w * float(np.sum(xi * xi - 1.0)) / sd
        out[i] = acc
    return out


def sample_rosenblatt(params, n_samples, seed=0, method="spectral"):
    """Approximate X_beta draws (unit variance by construction)."""
    return _sample(params, n_samples, seed, (1.0,), method)


def sample_composite(params, n_samples, seed=0, method="spectral"):
    """V = sum_k c_k X_k with independent standard components."""
    if params.weights is None:
        raise ValueError("composite sampling needs weights")
    return _sample(params, n_samples, seed, params.weights, method)


def kolmogorov_distance(a, b=None):
    """Two-sample KS statistic, or distance to N(0,1) when b is None."""
    a = np.asarray(a, dtype=float)
    if a.size == 0 or (b is not None and len(b) == 0):
        raise ValueError("empty sample")
    if b is None:
        return float(stats.kstest(a, "norm").statistic)
    return float(stats.ks_2samp(a, np.asarray(b, dtype=float)).statistic)


def doubling_check(params, n_samples=20000, seed=0):
    """KS distance between the n_terms and 2 n_terms approximations."""
    a = sample_rosenblatt(params, n_samples, seed)
    twice = RosenblattParams(params.beta, 2 * params.n_terms, params.burn_in, params.weights)
    b = sample_rosenblatt(twice, n_samples, seed + 1)
    return kolmogorov_distance(a, b)
