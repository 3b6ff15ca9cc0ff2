"""Special functions on the sphere and the Gaussian line.

Real spherical harmonics use the Condon-Shortley-free convention

    Y_l0 = lambda_l^0(cos t)
    Y_lm = sqrt(2) lambda_l^m(cos t) cos(m p),   m > 0
    Y_lm = sqrt(2) lambda_l^|m|(cos t) sin(|m| p), m < 0

with lambda_l^m the orthonormalized associated Legendre function.  Every
formula in the package only needs an orthonormal real basis, so the sign
choice is a convention and nothing more.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special as sps

FOUR_PI = 4.0 * math.pi
_DOMAIN_TOL = 1e-12


def _check_unit_interval(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + _DOMAIN_TOL):
        raise ValueError("argument outside [-1, 1]")
    return np.clip(x, -1.0, 1.0)


def legendre_p(ell, x):
    """Legendre polynomial P_ell(x) by the Bonnet recurrence."""
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    x = _check_unit_interval(x)
    p_prev = np.ones_like(x)
    if ell == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    p = x.copy()
    for n in range(1, ell):
        p_prev, p = p, ((2 * n + 1) * x * p - n * p_prev) / (n + 1)
    return p if p.ndim else float(p)


def legendre_all(lmax, x):
    """Array of P_0..P_lmax at x, shape (lmax+1,) + x.shape."""
    x = _check_unit_interval(x)
    out = np.empty((lmax + 1,) + x.shape)
    out[0] = 1.0
    if lmax >= 1:
        out[1] = x
    for n in range(1, lmax):
        out[n + 1] = ((2 * n + 1) * x * out[n] - n * out[n - 1]) / (n + 1)
    return out


def _normalized_alf(lmax, x):
    """lambda_l^m(x) for 0 <= m <= l <= lmax, shape (lmax+1, lmax+1, npts)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    lam = np.zeros((lmax + 1, lmax + 1, x.size))
    lam[0, 0] = 1.0 / math.sqrt(FOUR_PI)
    for m in range(1, lmax + 1):
        lam[m, m] = math.sqrt((2 * m + 1) / (2.0 * m)) * s * lam[m - 1, m - 1]
    for m in range(0, lmax):
        lam[m + 1, m] = math.sqrt(2 * m + 3) * x * lam[m, m]
        for ell in range(m + 2, lmax + 1):
            a = math.sqrt((4.0 * ell * ell - 1.0) / (ell * ell - m * m))
            b = math.sqrt(((ell - 1.0) ** 2 - m * m) / (4.0 * (ell - 1.0) ** 2 - 1.0))
            lam[ell, m] = a * (x * lam[ell - 1, m] - b * lam[ell - 2, m])
    return lam


def real_spherical_harmonic(ell, m, theta, phi):
    """Real orthonormal Y_lm at colatitude theta and longitude phi."""
    if ell < 0 or abs(m) > ell:
        raise ValueError(f"invalid (ell, m) = ({ell}, {m})")
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    shape = np.broadcast(theta, phi).shape
    th, ph = np.broadcast_arrays(theta, phi)
    lam = _normalized_alf(ell, np.cos(th).ravel())[ell, abs(m)]
    ph = ph.ravel()
    if m > 0:
        val = math.sqrt(2.0) * lam * np.cos(m * ph)
    elif m < 0:
        val = math.sqrt(2.0) * lam * np.sin(-m * ph)
    else:
        val = lam
    val = val.reshape(shape)
    return val if val.ndim else float(val)


def harmonic_index(ells):
    """List of (ell, m) in synthesis order for the given multipoles."""
    return [(ell, m) for ell in sorted(ells) for m in range(-ell, ell + 1)]


def harmonic_matrix(ells, theta, phi):
    """Matrix Y[k, i] = Y_{l_k m_k}(theta_i, phi_i) in harmonic_index order."""
    theta = np.ravel(np.asarray(theta, dtype=float))
    phi = np.ravel(np.asarray(phi, dtype=float))
    index = harmonic_index(ells)
    lmax = max(ells) if len(ells) else 0
    lam = _normalized_alf(lmax, np.cos(theta))
    out = np.empty((len(index), theta.size))
    root2 = math.sqrt(2.0)
    for k, (ell, m) in enumerate(index):
        if m > 0:
            out[k] = root2 * lam[ell, m] * np.cos(m * phi)
        elif m < 0:
            out[k] = root2 * lam[ell, -m] * np.sin(-m * phi)
        else:
            out[k] = lam[ell, 0]
    return out


def hermite(q, x):
    """Probabilists' Hermite polynomial H_q(x)."""
    if q < 0:
        raise ValueError("q must be nonnegative")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if q == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = x.copy()
    for n in range(1, q):
        h_prev, h = h, x * h - n * h_prev
    return h if h.ndim else float(h)


def gaussian_phi_Phi(u):
    """Standard normal density and upper tail probability at u."""
    u = np.asarray(u, dtype=float)
    dens = np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
    tail = 0.5 * sps.erfc(u / math.sqrt(2.0))
    if dens.ndim == 0:
        return float(dens), float(tail)
    return dens, tail


def j_coefficient(q, u):
    """Chaos coefficient J_q(u) = H_{q-1}(u) phi(u)."""
    if q < 1:
        raise ValueError("q must be at least 1")
    dens, _ = gaussian_phi_Phi(u)
    return hermite(q - 1, u) * dens


def wigner3j_000(l1, l2, l3):
    """Wigner 3j symbol (l1 l2 l3; 0 0 0) in closed form."""
    big = l1 + l2 + l3
    if big % 2 or l3 > l1 + l2 or l1 > l2 + l3 or l2 > l1 + l3:
        return 0.0
    g = big // 2
    lg = math.lgamma
    log_val = 0.5 * (lg(big - 2 * l1 + 1) + lg(big - 2 * l2 + 1)
                     + lg(big - 2 * l3 + 1) - lg(big + 2))
    log_val += lg(g + 1) - lg(g - l1 + 1) - lg(g - l2 + 1) - lg(g - l3 + 1)
    return (-1.0) ** g * math.exp(log_val)


def gaunt3(l1, l2, l3):
    """Integral of Y_{l1,0} Y_{l2,0} Y_{l3,0} over the sphere."""
    w = wigner3j_000(l1, l2, l3)
    if w == 0.0:
        return 0.0
    return math.sqrt((2 * l1 + 1) * (2 * l2 + 1) * (2 * l3 + 1) / FOUR_PI) * w * w


@lru_cache(maxsize=64)
def _gl(n):
    return np.polynomial.legendre.leggauss(n)


def zonal_gaunt(ells):
    """Integral of prod Y_{l,0} over the sphere, any number of factors.

    Gauss-Legendre in z = cos(theta) with enough nodes to integrate the
    degree sum(ells) polynomial exactly.
    """
    ells = tuple(int(e) for e in ells)
    if not ells:
        return FOUR_PI
    total = sum(ells)
    if total % 2:
        return 0.0
    if 2 * max(ells) > total:
        # P_lmax is orthogonal to the product of the lower-degree factors
        return 0.0
    n = total // 2 + 2
    z, w = _gl(n)
    return _zonal_sum(ells, z, w)


def _zonal_sum(ells, z, w):
    pl = legendre_all(max(ells), z)
    prod = np.ones_like(z)
    for ell in ells:
        prod = prod * math.sqrt((2 * ell + 1) / FOUR_PI) * pl[ell]
    return float(2.0 * math.pi * np.dot(w, prod))


def gaunt_bound(ells):
    """Upper bound sqrt(prod_{i<q}(2l_i+1) / ((4pi)^(q-2) (2l_q+1)))."""
    ells = list(ells)
    q = len(ells)
    num = 1.0
    for ell in ells[:-1]:
        num *= 2 * ell + 1
    return math.sqrt(num / (FOUR_PI ** (q - 2) * (2 * ells[-1] + 1)))


def gaunt_general(ells, quadrature):
    """Generalized Gaunt integral on the zonal nodes of a sphere quadrature."""
    ells = tuple(int(e) for e in ells)
    if len(ells) < 3:
        raise ValueError("gaunt_general needs at least three multipoles")
    if quadrature.exactness < sum(ells):
        raise ValueError(
            f"quadrature exact to degree {quadrature.exactness}, need {sum(ells)}")
    z = np.cos(quadrature.colatitude_nodes)
    w = quadrature.colatitude_weights
    return _zonal_sum(ells, z, w)


@dataclass(frozen=True, eq=False)
class SphereQuadrature:
    """Product grid: Gauss-Legendre in cos(theta), uniform in longitude.

    colatitude_weights integrate over z = cos(theta); each longitude gets
    weight 2 pi / n_longitude.  Polynomials of total degree `exactness`
    integrate exactly.
    """

    colatitude_nodes: np.ndarray
    colatitude_weights: np.ndarray
    n_longitude: int
    exactness: int

    def _key(self):
        return (self.exactness, self.n_longitude, tuple(np.round(self.colatitude_nodes, 15)))

    def __hash__(self):
        return hash(self._key())

    def __eq__(self, other):
        return isinstance(other, SphereQuadrature) and self._key() == other._key()

    @classmethod
    def gauss(cls, degree):
        """Smallest product grid exact for polynomials of the given degree."""
        if degree < 0:
            raise ValueError("degree must be nonnegative")
        n_lat = degree // 2 + 1
        z, w = _gl(n_lat)
        # ascending colatitude
        return cls(np.arccos(z[::-1]), w[::-1].copy(), degree + 1, degree)

    @property
    def l_exact(self):
        return self.exactness // 2

    @property
    def longitudes(self):
        return 2.0 * math.pi * np.arange(self.n_longitude) / self.n_longitude

    def points(self):
        """Flattened (theta, phi) arrays, latitude-major."""
        th, ph = np.meshgrid(self.colatitude_nodes, self.longitudes, indexing="ij")
        return th.ravel(), ph.ravel()

    def weights(self):
        w = np.repeat(self.colatitude_weights, self.n_longitude)
        return w * (2.0 * math.pi / self.n_longitude)

    def unit_vectors(self):
        th, ph = self.points()
        return np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=1)

    @property
    def size(self):
        return len(self.colatitude_nodes) * self.n_longitude


def hermite_sup_ratio(q, x_max=60.0, n_grid=200001):
    """max_x |exp(-x^2/4) H_q(x)| / (sqrt(q!) q^(-1/12)) on a dense grid."""
    x = np.linspace(-x_max, x_max, n_grid)
    # normalized recurrence h_n = H_n / sqrt(n!) times exp(-x^2/4), no overflow
    env = np.exp(-0.25 * x * x)
    h_prev = env.copy()
    if q == 0:
        return float(np.max(np.abs(h_prev)))
    h = x * env
    for n in range(1, q):
        h_prev, h = h, (x * h - math.sqrt(n) * h_prev) / math.sqrt(n + 1)
    return float(np.max(np.abs(h)) * q ** (1.0 / 12.0))
