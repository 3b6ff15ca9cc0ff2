"""Excursion areas, the functional M_T(u) and its chaotic projections."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special import FOUR_PI, gaussian_phi_Phi, j_coefficient


def excursion_areas(field, u):
    """A_u(t_k) for every time node: weighted count of grid points with Z >= u."""
    w = field.sphere.weights()
    return (field.values >= u).astype(float) @ w


def excursion_area(field, t_index, u):
    w = field.sphere.weights()
    return float(np.dot((field.values[t_index] >= u).astype(float), w))


def m_functional(field, u):
    """Midpoint-rule integral of A_u(t) - 4 pi (1 - Phi(u))."""
    _, tail = gaussian_phi_Phi(u)
    a = excursion_areas(field, u)
    return float(field.grid.dt * np.sum(a - FOUR_PI * tail))


def m_tilde(value, variance):
    if not variance > 0:
        raise ValueError("variance must be positive")
    return value / math.sqrt(variance)


@dataclass
class ChaosProjectionSet:
    u: float
    T: float
    values: dict  # q -> M_T(u)[q]
    residual: float  # M_T(u) - sum of the projections


def _hermite_sums(values, weights, q_max):
    """sum_i w_i H_q(Z_ik) summed over k, for q = 1..q_max, one pass."""
    out = np.zeros(q_max + 1)
    h_prev = np.ones_like(values)
    h = values.copy()
    out[1] = np.sum(h @ weights)
    for n in range(1, q_max):
        h_prev, h = h, values * h - n * h_prev
        out[n + 1] = np.sum(h @ weights)
    return out


def chaos_projections(field, u, q_max, with_residual=True):
    """M_T(u)[q] = (J_q(u)/q!) dt sum_k sum_i w_i H_q(Z_ik) for q = 1..q_max."""
    sums = _hermite_sums(field.values, field.sphere.weights(), q_max)
    dt = field.grid.dt
    vals = {}
    for q in range(1, q_max + 1):
        j = float(j_coefficient(q, u))
        vals[q] = 0.0 if j == 0.0 else j / math.factorial(q) * dt * float(sums[q])
    resid = m_functional(field, u) - math.fsum(vals.values()) if with_residual else math.nan
    return ChaosProjectionSet(u, field.grid.horizon, vals, resid)


def chaos_projection(field, u, q):
    if q < 1:
        raise ValueError("q must be at least 1")
    return chaos_projections(field, u, q, with_residual=False).values[q]


def chaos1_from_path(field, u):
    """First chaos from the a_00 path: phi(u) sqrt(4 pi) int a_00 dt."""
    dens, _ = gaussian_phi_Phi(u)
    a00 = field.paths.path(0, 0)
    return float(dens * math.sqrt(FOUR_PI) * field.grid.dt * np.sum(a00))


def monochromatic_component(field, ell):
    """Z_l(x, t_k) = sum_m a_lm(t_k) Y_lm(x) on the grid."""
    from .simulate import _harmonics_for
    paths = field.paths
    ells = tuple(sorted({e for e, _ in paths.index}))
    if ell not in ells:
        raise KeyError(f"multipole {ell} not in field")
    ymat = _harmonics_for(ells, field.sphere)
    rows = [k for k, (e, _) in enumerate(paths.index) if e == ell]
    return paths.values[rows].T @ ymat[rows]


def m_monochromatic(field, ell_star, u, c0=None):
    """(u/(2 sigma)) phi(u/sigma) int int H_2(Z_l/sigma), sigma^2 = (2l+1) C_l(0)/(4 pi)."""
    if c0 is None:
        if not field.paths.c0 or ell_star not in field.paths.c0:
            raise KeyError(f"multipole {ell_star} not in field")
        c0 = field.paths.c0[ell_star]
    sigma = math.sqrt((2 * ell_star + 1) * c0 / FOUR_PI)
    if not sigma > 0:
        raise ValueError("multipole has zero variance")
    if u == 0:
        return 0.0
    z = monochromatic_component(field, ell_star)
    dens, _ = gaussian_phi_Phi(u / sigma)
    w = field.sphere.weights()
    h2 = (z * z) @ w / sigma ** 2 - np.sum(w)
    return float(u / (2 * sigma) * dens * field.grid.dt * np.sum(h2))
