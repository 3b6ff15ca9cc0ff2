"""Covariance model Gamma(theta, tau) = sum_l (2l+1)/(4pi) C_l(tau) P_l(theta)."""

from __future__ import annotations

import enum
import math
import re
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .special import FOUR_PI, legendre_all

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TIE_TOL = 1e-12
NORM_TOL = 1e-10


class ModelError(ValueError):
    """Invalid covariance model or model file."""


def g_beta(beta, alpha, tau):
    """Memory kernel (1+|tau|)^-beta, or (1+|tau|)^-alpha when beta = 1."""
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta={beta} outside (0, 1]")
    tau = np.abs(np.asarray(tau, dtype=float))
    if beta == 1.0:
        if alpha is None or alpha < 2.0:
            raise ValueError("beta = 1 requires alpha >= 2")
        out = (1.0 + tau) ** (-alpha)
    else:
        out = (1.0 + tau) ** (-beta)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Multipole:
    ell: int
    c0: float
    beta: float
    alpha: Optional[float] = None
    g_fn: Optional[Callable] = field(default=None, compare=False)

    @property
    def decay(self):
        """Power of (1+tau) in the kernel: beta, or alpha for short memory."""
        return self.alpha if self.beta == 1.0 else self.beta

    @property
    def sigma2(self):
        return (2 * self.ell + 1) * self.c0 / FOUR_PI

    def kernel(self, tau):
        """C_l(tau)/C_l(0)."""
        val = g_beta(self.beta, self.alpha, tau)
        if self.g_fn is not None:
            val = val * np.asarray(self.g_fn(np.abs(np.asarray(tau, dtype=float))))
        return val


def _check_multipole(p, where):
    if not isinstance(p.ell, (int, np.integer)) or p.ell < 0:
        raise ModelError(f"{where}: ell must be a nonnegative integer")
    if not (math.isfinite(p.c0) and p.c0 >= 0):
        raise ModelError(f"{where}: c0 must be finite and >= 0")
    if not 0.0 < p.beta <= 1.0:
        raise ModelError(f"{where}: beta={p.beta} outside (0, 1]")
    if p.beta == 1.0:
        if p.alpha is None or not p.alpha >= 2.0:
            raise ModelError(f"{where}: beta = 1 requires alpha >= 2")
    elif p.alpha is not None:
        raise ModelError(f"{where}: alpha is only allowed when beta = 1")
    if p.g_fn is not None:
        g0 = float(np.asarray(p.g_fn(np.array([0.0])))[0])
        if abs(g0 - 1.0) > 1e-12:
            raise ModelError(f"{where}: g_fn(0) = {g0}, expected 1")
        far = np.asarray(p.g_fn(np.array([1e4, 1e6, 1e8])), dtype=float)
        if np.any(np.abs(far - 1.0) > 0.05) or abs(far[-1] - 1.0) > abs(far[0] - 1.0) + 1e-12:
            raise ModelError(f"{where}: g_fn does not tend to 1 at large tau")


@dataclass(frozen=True)
class CovarianceModel:
    """Validated, immutable list of multipoles sorted by ell."""

    multipoles: tuple

    def __init__(self, multipoles, autonormalize=False):
        entries = []
        for i, p in enumerate(multipoles):
            if not isinstance(p, Multipole):
                p = Multipole(**p)
            p = Multipole(int(p.ell), float(p.c0), float(p.beta),
                          None if p.alpha is None else float(p.alpha), p.g_fn)
            _check_multipole(p, f"multipole #{i + 1} (ell={p.ell})")
            entries.append(p)
        entries.sort(key=lambda p: p.ell)
        ells = [p.ell for p in entries]
        if len(set(ells)) != len(ells):
            raise ModelError("duplicate multipole")
        if not entries or entries[0].ell != 0 or entries[0].c0 <= 0:
            raise ModelError("an ell=0 entry with c0 > 0 is required")
        total = math.fsum(p.sigma2 for p in entries)
        if abs(total - 1.0) > NORM_TOL:
            if not autonormalize:
                raise ModelError(f"sum (2l+1) C_l(0)/(4pi) = {total!r}, expected 1")
            entries = [Multipole(p.ell, p.c0 / total, p.beta, p.alpha, p.g_fn)
                       for p in entries]
        p0 = entries[0]
        if p0.beta == 1.0:
            val, _ = integrate.quad(lambda t: float(p0.kernel(t)), 0, np.inf, limit=200)
            if not val > 0:
                raise ModelError("beta0 = 1 requires a positive integral of C_0")
        object.__setattr__(self, "multipoles", tuple(entries))

    @classmethod
    def from_shares(cls, spec, autonormalize=False):
        """Build from {ell: (sigma2, beta[, alpha])} with sigma2 the variance share."""
        entries = []
        for ell, vals in spec.items():
            sigma2, beta = vals[0], vals[1]
            alpha = vals[2] if len(vals) > 2 else None
            entries.append(Multipole(ell, FOUR_PI * sigma2 / (2 * ell + 1), beta, alpha))
        return cls(entries, autonormalize=autonormalize)

    # lookups
    @property
    def ells(self):
        return tuple(p.ell for p in self.multipoles)

    @property
    def lmax(self):
        return self.multipoles[-1].ell

    def get(self, ell):
        for p in self.multipoles:
            if p.ell == ell:
                return p
        raise KeyError(f"multipole {ell} not in model")

    def c_ell(self, ell, tau):
        p = self.get(ell)
        return p.c0 * p.kernel(tau)

    def gamma_cov(self, theta, tau, L=None):
        """Space-time covariance at cosine `theta` and lag `tau`."""
        if L is None:
            L = self.lmax
        if L < self.lmax:
            raise ValueError(f"truncation L={L} below model support {self.lmax}")
        theta = np.asarray(theta, dtype=float)
        tau = np.asarray(tau, dtype=float)
        pl = legendre_all(self.lmax, theta)
        out = 0.0
        for p in self.multipoles:
            out = out + p.sigma2 * p.kernel(tau) * pl[p.ell]
        out = np.asarray(out)
        return out if out.ndim else float(out)

    def gbar(self, tau):
        """Envelope sum_l sigma_l^2 |C_l(tau)|/C_l(0) >= |Gamma(., tau)|."""
        tau = np.asarray(tau, dtype=float)
        return sum(p.sigma2 * np.abs(p.kernel(tau)) for p in self.multipoles)

    @property
    def has_default_kernels(self):
        return all(p.g_fn is None for p in self.multipoles)

    # memory structure
    @property
    def beta0(self):
        return self.multipoles[0].beta

    @property
    def beta_star(self):
        betas = [p.beta for p in self.multipoles[1:] if p.c0 > 0]
        return min(betas) if betas else None

    @property
    def i_star(self):
        b = self.beta_star
        if b is None:
            return ()
        return tuple(p.ell for p in self.multipoles if p.c0 > 0 and abs(p.beta - b) <= TIE_TOL)

    @property
    def beta_starstar(self):
        b = self.beta_star
        if b is None:
            return None
        rest = [p.beta for p in self.multipoles[1:]
                if p.c0 > 0 and p.beta - b > TIE_TOL]
        return min(rest) if rest else None

    def digest(self):
        """Stable text form used for hashing."""
        parts = [f"{p.ell}:{p.c0!r}:{p.beta!r}:{p.alpha!r}:{p.g_fn is not None}"
                 for p in self.multipoles]
        return ";".join(parts)


# model files

_ENTRY_KEYS = {"ell", "c0", "beta", "alpha"}
_TOP_KEYS = {"multipole", "autonormalize", "name"}


def _entry_lines(text):
    return [i + 1 for i, line in enumerate(text.splitlines())
            if re.match(r"\s*\[\[\s*multipole\s*\]\]", line)]


def parse_model(text, source="<model>"):
    """Parse TOML model text with strict keys."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ModelError(f"{source}: {exc}") from None
    return model_from_dict(data, source, _entry_lines(text))


def model_from_dict(data, source="<model>", lines=None):
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ModelError(f"{source}: unknown top-level keys {sorted(unknown)}")
    raw = data.get("multipole")
    if not isinstance(raw, list) or not raw:
        raise ModelError(f"{source}: no [[multipole]] entries")
    entries = []
    for i, item in enumerate(raw):
        where = f"{source}: multipole #{i + 1}"
        if lines and i < len(lines):
            where += f" (line {lines[i]})"
        bad = set(item) - _ENTRY_KEYS
        if bad:
            raise ModelError(f"{where}: unknown keys {sorted(bad)}")
        missing = {"ell", "c0", "beta"} - set(item)
        if missing:
            raise ModelError(f"{where}: missing keys {sorted(missing)}")
        if not isinstance(item["ell"], int) or isinstance(item["ell"], bool):
            raise ModelError(f"{where}: ell must be an integer")
        try:
            p = Multipole(item["ell"], float(item["c0"]), float(item["beta"]),
                          None if item.get("alpha") is None else float(item["alpha"]))
            _check_multipole(p, where)
        except (TypeError, ValueError) as exc:
            raise ModelError(str(exc)) from None
        entries.append(p)
    try:
        return CovarianceModel(entries, autonormalize=bool(data.get("autonormalize", False)))
    except ModelError as exc:
        raise ModelError(f"{source}: {exc}") from None


def load_model(path):
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    return parse_model(text, source=str(path))


def dump_model(model):
    """TOML text for a model with default kernels."""
    out = []
    for p in model.multipoles:
        out.append("[[multipole]]")
        out.append(f"ell = {p.ell}")
        out.append(f"c0 = {p.c0!r}")
        out.append(f"beta = {p.beta!r}")
        if p.alpha is not None:
            out.append(f"alpha = {p.alpha!r}")
        out.append("")
    return "\n".join(out)


# regimes

class Dominating(str, enum.Enum):
    FIRST = "FirstChaos"
    SECOND = "SecondChaos"
    THIRD = "ThirdChaos"
    ALL = "AllChaoses"
    BOUNDARY = "Boundary"


class LimitLaw(str, enum.Enum):
    GAUSSIAN = "Gaussian"
    ROSENBLATT = "CompositeRosenblatt2"
    ORDER3 = "NonGaussianOrder3"
    DEGENERATE = "DegenerateBoundary"


@dataclass
class RegimeReport:
    beta_star: Optional[float]
    I_star: tuple
    beta_starstar: Optional[float]
    dominating: Dominating
    exponent: float
    log_factor: bool
    limit_law: LimitLaw
    limit_constant: float
    diagnostic: str = ""

    def as_dict(self):
        return {
            "beta_star": self.beta_star,
            "I_star": list(self.I_star),
            "beta_starstar": self.beta_starstar,
            "dominating": self.dominating.value,
            "exponent": self.exponent,
            "log_factor": self.log_factor,
            "limit_law": self.limit_law.value,
            "limit_constant": self.limit_constant,
            "diagnostic": self.diagnostic,
        }

    def summary(self):
        rate = "T log T" if self.log_factor else f"T^{self.exponent:g}"
        return f"{self.dominating.value}, {rate}, {self.limit_law.value}"


def _lt(a, b):
    return a < b - TIE_TOL


def _eq(a, b):
    return abs(a - b) <= TIE_TOL


def classify_regime(model, u):
    """Dominating chaos, variance growth and limit law for level u."""
    b0 = model.beta0
    bs = model.beta_star
    istar = model.i_star
    bss = model.beta_starstar
    q = 3 if u == 0 else 2
    qbs = math.inf if bs is None else q * bs

    def report(dom, exponent, log, law, diag=""):
        rep = RegimeReport(bs, istar, bss, dom, exponent, log, law, math.nan, diag)
        if dom is not Dominating.BOUNDARY:
            from .variance import asymptotic_prediction
            rep.limit_constant = asymptotic_prediction(model, u, regime=rep).constant
        return rep

    def boundary(diag):
        return RegimeReport(bs, istar, bss, Dominating.BOUNDARY, max(2 - b0, 2 - qbs, 1.0),
                            False, LimitLaw.DEGENERATE, math.nan, diag)

    high = Dominating.SECOND if q == 2 else Dominating.THIRD
    high_law = LimitLaw.ROSENBLATT if q == 2 else LimitLaw.ORDER3
    if q == 3 and bs is not None and not any(ell % 2 == 0 for ell in istar):
        odd_istar = True
    else:
        odd_istar = False

    if _lt(b0, 1.0):
        if _lt(b0, qbs):
            return report(Dominating.FIRST, 2 - b0, False, LimitLaw.GAUSSIAN)
        if _eq(b0, qbs):
            return boundary(f"beta0 = {q}*beta_star: first and order-{q} chaoses tie")
        if odd_istar:
            return boundary("third chaos dominant but I* has no even multipole")
        return report(high, 2 - qbs, False, high_law)
    # beta0 == 1
    if _lt(qbs, 1.0):
        if odd_istar:
            return boundary("third chaos dominant but I* has no even multipole")
        return report(high, 2 - qbs, False, high_law)
    if _eq(qbs, 1.0):
        if odd_istar:
            return boundary("third chaos dominant but I* has no even multipole")
        return report(high, 1.0, True, LimitLaw.DEGENERATE,
                      f"{q}*beta_star = 1: T log T growth, limit law not identified")
    return report(Dominating.ALL, 1.0, False, LimitLaw.GAUSSIAN)


@dataclass
class Theorem2Weights:
    N_star: int
    weights: np.ndarray
    v_star: float
    a_discrepancy: float


def theorem2_weights(model):
    """Composite Rosenblatt weights of the second-chaos limit.

    Weights are C_l(0)/sqrt(v) with v chosen so that sum c_k^2 = 1; `v_star`
    is the value computed with the printed a(beta), and `a_discrepancy`
    is sum c_k^2 under that printed constant.
    """
    from .rosenblatt import sigma_and_a
    bs = model.beta_star
    if bs is None or not _lt(2 * bs, min(model.beta0, 1.0)):
        raise ModelError("theorem2_weights needs 2*beta_star < min(beta0, 1)")
    c = []
    for ell in model.i_star:
        c.extend([model.get(ell).c0] * (2 * ell + 1))
    c = np.array(c)
    ssq = math.fsum(c * c)
    _, a = sigma_and_a(bs)
    v_star = a * a * 2 * ssq / ((1 - bs) * (1 - 2 * bs))
    return Theorem2Weights(len(c), c / math.sqrt(ssq), v_star, ssq / v_star)
