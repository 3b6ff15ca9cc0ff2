"""Monte Carlo fields Z(x,t) = sum_lm a_lm(t) Y_lm(x) on a sphere grid x time grid."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sfft
from scipy import linalg

from .special import harmonic_index, harmonic_matrix

log = logging.getLogger(__name__)

CLIP_TOL = 1e-8


@dataclass(frozen=True)
class TimeGrid:
    """Midpoint nodes t_k = (k + 1/2) dt on [0, T]."""

    horizon: float
    n_steps: int

    def __post_init__(self):
        if not self.horizon > 0 or self.n_steps < 1:
            raise ValueError("need T > 0 and n_steps >= 1")

    @classmethod
    def from_dt(cls, horizon, dt):
        n = int(round(horizon / dt))
        if n < 1 or abs(n * dt - horizon) > 1e-9 * horizon:
            raise ValueError(f"T={horizon} is not a multiple of dt={dt}")
        return cls(float(horizon), n)

    @property
    def dt(self):
        return self.horizon / self.n_steps

    @property
    def nodes(self):
        return (np.arange(self.n_steps) + 0.5) * self.dt


def stream(master_seed, *key):
    """Counter-based generator for one (experiment, replication, l, m) key."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


class StationarySampler:
    """Stationary Gaussian vectors with covariance [c((j-k) dt)].

    Circulant embedding; eigenvalues slightly below zero are clipped, larger
    negative mass switches to a dense Cholesky factor.
    """

    def __init__(self, cov_fn, grid):
        n = grid.n_steps
        self.n = n
        lags = np.arange(n) * grid.dt
        row = np.asarray(cov_fn(lags), dtype=float)
        self.c0 = float(row[0]) if n else 0.0
        self.method = "zero" if self.c0 == 0.0 else "circulant"
        if self.method == "zero":
            return
        if n == 1:
            self.method = "cholesky"
            self.chol = np.array([[math.sqrt(self.c0)]])
            return
        half = sfft.next_fast_len(n - 1)  # embedding size 2*half >= 2(n-1)
        ext = np.asarray(cov_fn(np.arange(half + 1) * grid.dt), dtype=float)
        circ = np.concatenate([ext, ext[-2:0:-1]])
        lam = sfft.rfft(circ).real
        lmax = lam.max()
        neg = lam.min()
        if neg < -CLIP_TOL * lmax:
            log.warning("circulant embedding not nonnegative (min %.3g); using Cholesky", neg)
            self.method = "cholesky"
            idx = np.arange(n)
            mat = row[np.abs(idx[:, None] - idx[None, :])]
            self.chol = linalg.cholesky(mat, lower=True)
            return
        if neg < 0:
            log.warning("clipping circulant eigenvalues down to %.3g", neg)
        self.size = 2 * half
        self.scale = np.sqrt(np.clip(lam, 0.0, None))

    def sample(self, rng, count=None):
        """One path (or `count` paths as rows)."""
        shape = (self.n,) if count is None else (count, self.n)
        if self.method == "zero":
            return np.zeros(shape)
        if self.method == "cholesky":
            z = rng.standard_normal(shape)
            return z @ self.chol.T
        m = self.size
        nf = self.scale.size  # m//2 + 1
        lead = () if count is None else (count,)
        w = rng.standard_normal(lead + (m,))
        # Hermitian noise: real endpoints, complex interior with E|xi|^2 = 1
        xi = np.empty(lead + (nf,), dtype=complex)
        xi[..., 0] = w[..., 0]
        xi[..., -1] = w[..., 1]
        inner = (w[..., 2:nf] + 1j * w[..., nf:m]) / math.sqrt(2.0)
        xi[..., 1:-1] = inner
        path = sfft.irfft(self.scale * xi, n=m) * math.sqrt(m)
        return path[..., : self.n]


def sample_coefficient_path(cov_fn, grid, rng):
    """a(t_k) with E a(t) a(s) = cov_fn(t - s)."""
    return StationarySampler(cov_fn, grid).sample(rng)


@dataclass
class CoefficientPaths:
    """a_lm(t_k) stacked in harmonic_index order, with seed lineage."""

    index: list
    values: np.ndarray  # (n_coef, n_steps)
    seed: int
    key: tuple
    c0: dict = None  # C_l(0) per multipole, when known

    def path(self, ell, m):
        return self.values[self.index.index((ell, m))]


@dataclass
class FieldSample:
    values: np.ndarray  # (n_steps, n_points)
    paths: CoefficientPaths
    sphere: object
    grid: TimeGrid


@lru_cache(maxsize=32)
def _harmonics_for(ells, sphere):
    th, ph = sphere.points()
    return harmonic_matrix(list(ells), th, ph)


_SAMPLER_CACHE = {}


def _samplers(model, grid):
    key = (model.digest(), grid, id(model))
    hit = _SAMPLER_CACHE.get(key)
    if hit is None:
        if len(_SAMPLER_CACHE) > 64:
            _SAMPLER_CACHE.clear()
        hit = {p.ell: StationarySampler(lambda t, e=p.ell: model.c_ell(e, t), grid)
               for p in model.multipoles}
        _SAMPLER_CACHE[key] = hit
    return hit


def simulate_paths(model, grid, master_seed, key=(0,)):
    """Independent coefficient paths, one stream per (key, l, m)."""
    samplers = _samplers(model, grid)
    index = harmonic_index(model.ells)
    out = np.empty((len(index), grid.n_steps))
    for k, (ell, m) in enumerate(index):
        out[k] = samplers[ell].sample(stream(master_seed, *key, ell, m + ell))
    c0 = {p.ell: p.c0 for p in model.multipoles}
    return CoefficientPaths(index, out, int(master_seed), tuple(key), c0)


def synthesize_field(paths, sphere, grid):
    """Direct synthesis Z = A^T Y as one matrix product over the coefficients."""
    if paths.values.shape[1] != grid.n_steps:
        raise ValueError("paths and time grid disagree")
    ells = tuple(sorted({ell for ell, _ in paths.index}))
    if harmonic_index(ells) != paths.index:
        raise ValueError("paths do not cover whole multipoles")
    ymat = _harmonics_for(ells, sphere)
    z = paths.values.T @ ymat
    return FieldSample(z, paths, sphere, grid)


def simulate_field(model, sphere, grid, master_seed, key=(0,)):
    return synthesize_field(simulate_paths(model, grid, master_seed, key), sphere, grid)


def empirical_space_time_cov(samples, theta, tau, tol=1e-9):
    """MC estimate of E Z(x,t) Z(y,t+tau) at <x,y> = theta, with its standard error.

    Averages over all grid pairs at the requested angle and all time pairs
    at the requested lag; the standard error is across samples.
    """
    samples = list(samples)
    first = samples[0]
    lag = tau / first.grid.dt
    ilag = int(round(lag))
    if abs(lag - ilag) > 1e-9 or ilag >= first.grid.n_steps or ilag < 0:
        raise ValueError("tau must be a nonnegative multiple of dt inside the grid")
    u = first.sphere.unit_vectors()
    dots = u @ u.T
    ii, jj = np.nonzero(np.abs(dots - theta) <= tol)
    if ii.size == 0:
        raise ValueError(f"no grid pair at cosine {theta}")
    est = []
    for s in samples:
        z = s.values
        a = z[: z.shape[0] - ilag]
        b = z[ilag:]
        est.append(np.mean(a[:, ii] * b[:, jj]))
    est = np.asarray(est)
    se = est.std(ddof=1) / math.sqrt(est.size) if est.size > 1 else math.nan
    return float(est.mean()), float(se)


def write_field_dump(sample, path, model=None):
    """Binary .npy matrix (time x point) plus a JSON sidecar."""
    path = str(path)
    np.save(path if path.endswith(".npy") else path + ".npy", sample.values)
    th, ph = sample.sphere.points()
    meta = {
        "shape": list(sample.values.shape),
        "rows": "time nodes t_k = (k + 1/2) dt",
        "columns": "sphere grid points, latitude-major",
        "T": sample.grid.horizon,
        "n_steps": sample.grid.n_steps,
        "sphere_exactness": sample.sphere.exactness,
        "n_colatitude": int(len(sample.sphere.colatitude_nodes)),
        "n_longitude": sample.sphere.n_longitude,
        "seed": sample.paths.seed,
        "key": list(sample.paths.key),
    }
    if model is not None:
        from .io import text_hash
        meta["model_hash"] = text_hash(model.digest())
    base = path[:-4] if path.endswith(".npy") else path
    with open(base + ".json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
