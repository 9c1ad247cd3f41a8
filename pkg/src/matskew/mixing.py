"""
Scalar mixing laws: generalized inverse Gaussian, inverse Gaussian, gamma.

The GIG law is used in the ``(a, b, lambda)`` form

    f(y) = (a/b)^{lambda/2} y^{lambda-1} / (2 K_lambda(sqrt(ab)))
           * exp(-(a y + b / y) / 2),          y > 0,

and, where convenient, in the ``(omega, eta, lambda)`` form with
``omega = sqrt(ab)`` and ``eta = sqrt(a/b)``.

Parameter containers accept numpy arrays in place of scalars, which is how
the E-step evaluates one posterior law per observation in a single call.
"""

from dataclasses import dataclass

import numpy as np

from . import specfun
from .errors import BoundaryError, DomainError
from .rng import make_rng

__all__ = [
    "GigParams",
    "GigEtaParams",
    "IgParams",
    "GammaParams",
    "GigMoments",
    "gig_logpdf",
    "gig_moments",
    "gig_eta_to_ab",
    "gig_ab_to_eta",
    "gig_sample",
    "ig_logpdf",
    "ig_sample",
    "gamma_sample",
]


def _positive(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    if np.any(arr <= 0.0):
        raise BoundaryError(f"{name} must be strictly positive, got {value!r}")


def _finite(name, value):
    if not np.all(np.isfinite(np.asarray(value, dtype=float))):
        raise DomainError(f"{name} must be finite")


@dataclass(frozen=True)
class GigParams:
    """GIG(a, b, lambda); ``a`` multiplies ``y`` and ``b`` multiplies ``1/y``."""

    a: float
    b: float
    lam: float

    def __post_init__(self):
        _positive("a", self.a)
        _positive("b", self.b)
        _finite("lambda", self.lam)

    @property
    def omega(self):
        return np.sqrt(np.asarray(self.a) * np.asarray(self.b))


@dataclass(frozen=True)
class GigEtaParams:
    omega: float
    eta: float
    lam: float

    def __post_init__(self):
        _positive("omega", self.omega)
        _positive("eta", self.eta)
        _finite("lambda", self.lam)


@dataclass(frozen=True)
class IgParams:
    """IG(delta, gamma): mean ``delta/gamma``, variance ``delta/gamma**3``."""

    delta: float
    gamma: float

    def __post_init__(self):
        _positive("delta", self.delta)
        _positive("gamma", self.gamma)


@dataclass(frozen=True)
class GammaParams:
    shape: float
    rate: float

    def __post_init__(self):
        _positive("shape", self.shape)
        _positive("rate", self.rate)


@dataclass(frozen=True)
class GigMoments:
    """``E[W]``, ``E[1/W]`` and ``E[log W]`` of a GIG law."""

    e_w: np.ndarray
    e_winv: np.ndarray
    e_logw: np.ndarray


def gig_logpdf(y, p):
    """Log density of GIG(a, b, lambda) at ``y > 0``."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)) or np.any(y <= 0.0):
        raise DomainError("GIG density is defined for finite y > 0 only")
    a, b, lam = (np.asarray(v, dtype=float) for v in (p.a, p.b, p.lam))
    out = (
        0.5 * lam * np.log(a / b)
        + (lam - 1.0) * np.log(y)
        - np.log(2.0)
        - specfun.log_bessel_k(lam, np.sqrt(a * b))
        - 0.5 * (a * y + b / y)
    )
    return float(out) if np.ndim(out) == 0 else out


def gig_moments(p, log_k_pair=None):
    """Closed-form ``E[W]``, ``E[1/W]``, ``E[log W]`` of GIG(a, b, lambda).

    With ``omega = sqrt(ab)`` and ``R = K_{lambda+1}(omega)/K_lambda(omega)``::

        E[W]     = sqrt(b/a) R
        E[1/W]   = sqrt(a/b) R - 2 lambda / b
        E[log W] = log sqrt(b/a) + d/d lambda log K_lambda(omega)

    ``log_k_pair`` may carry an already computed
    ``(log K_lambda(omega), log K_{lambda+1}(omega))``.
    """
    a, b, lam = (np.asarray(v, dtype=float) for v in (p.a, p.b, p.lam))
    omega = np.sqrt(a * b)
    if log_k_pair is None:
        log_k_pair = specfun.log_bessel_k_pair(lam, omega)
    k0, k1 = log_k_pair
    ratio = np.exp(np.asarray(k1) - np.asarray(k0))
    scale = np.sqrt(b / a)
    e_w = scale * ratio
    e_winv = ratio / scale - 2.0 * lam / b
    e_logw = np.log(scale) + specfun.dlog_bessel_k_dorder(lam, omega)
    if np.ndim(e_w) == 0:
        return GigMoments(float(e_w), float(e_winv), float(e_logw))
    return GigMoments(e_w, e_winv, np.asarray(e_logw))


def gig_eta_to_ab(p):
    """``(omega, eta, lambda) -> (a, b, lambda)`` with ``a = omega*eta``, ``b = omega/eta``."""
    return GigParams(p.omega * p.eta, p.omega / p.eta, p.lam)


def gig_ab_to_eta(p):
    return GigEtaParams(np.sqrt(p.a * p.b), np.sqrt(p.a / p.b), p.lam)


# ---------------------------------------------------------------------------
# Sampling
#
# The GIG generator follows Hormann & Leydold (2014): the standardized law
# x^{lambda-1} exp(-omega/2 (x + 1/x)) with lambda >= 0 is drawn by one of
# three rejection schemes, then rescaled by sqrt(b/a) (and inverted when
# lambda < 0).  Candidates are produced in vectorized batches; the output is
# a deterministic function of the generator state.
# ---------------------------------------------------------------------------


def _collect(rng, count, propose):
    out = np.empty(count)
    filled = 0
    while filled < count:
        need = count - filled
        accepted = propose(rng, int(need * 1.25) + 16)
        take = accepted[:need]
        out[filled:filled + take.size] = take
        filled += take.size
    return out


def _gig_mode(lam, omega):
    if lam >= 1.0:
        return (np.sqrt((lam - 1.0) ** 2 + omega ** 2) + (lam - 1.0)) / omega
    return omega / (np.sqrt((1.0 - lam) ** 2 + omega ** 2) + (1.0 - lam))


def _rou_noshift(lam, omega):
    t = 0.5 * (lam - 1.0)
    s = 0.25 * omega
    xm = _gig_mode(lam, omega)
    nc = t * np.log(xm) - s * (xm + 1.0 / xm)
    ym = ((lam + 1.0) + np.sqrt((lam + 1.0) ** 2 + omega ** 2)) / omega
    um = np.exp(0.5 * (lam + 1.0) * np.log(ym) - s * (ym + 1.0 / ym) - nc)

    def propose(rng, size):
        u = um * rng.random(size)
        v = rng.random(size)
        with np.errstate(divide="ignore", invalid="ignore"):
            x = u / v
            ok = np.log(v) <= t * np.log(x) - s * (x + 1.0 / x) - nc
        return x[ok & (x > 0.0) & np.isfinite(x)]

    return propose


def _rou_shift(lam, omega):
    t = 0.5 * (lam - 1.0)
    s = 0.25 * omega
    xm = _gig_mode(lam, omega)
    nc = t * np.log(xm) - s * (xm + 1.0 / xm)
    # extrema of (x - xm) sqrt(f(x)) are roots of a cubic; trigonometric solution
    a = -(2.0 * (lam + 1.0) / omega + xm)
    b = 2.0 * (lam - 1.0) * xm / omega - 1.0
    c = xm
    p = b - a * a / 3.0
    q = 2.0 * a ** 3 / 27.0 - a * b / 3.0 + c
    fi = np.arccos(-q / (2.0 * np.sqrt(-(p ** 3) / 27.0)))
    fak = 2.0 * np.sqrt(-p / 3.0)
    y1 = fak * np.cos(fi / 3.0) - a / 3.0
    y2 = fak * np.cos(fi / 3.0 + 4.0 / 3.0 * np.pi) - a / 3.0
    uplus = (y1 - xm) * np.exp(t * np.log(y1) - s * (y1 + 1.0 / y1) - nc)
    uminus = (y2 - xm) * np.exp(t * np.log(y2) - s * (y2 + 1.0 / y2) - nc)

    def propose(rng, size):
        u = uminus + rng.random(size) * (uplus - uminus)
        v = rng.random(size)
        with np.errstate(divide="ignore", invalid="ignore"):
            x = u / v + xm
            ok = (x > 0.0) & np.isfinite(x)
            ok &= np.log(v) <= t * np.log(x) - s * (x + 1.0 / x) - nc
        return x[ok]

    return propose


def _log_concave_hat(lam, omega):
    # 0 <= lambda < 1, small omega: constant hat near the mode, power and
    # exponential hats in the tail.
    xm = _gig_mode(lam, omega)
    x0 = omega / (1.0 - lam)
    k0 = np.exp((lam - 1.0) * np.log(xm) - 0.5 * omega * (xm + 1.0 / xm))
    area0 = k0 * x0
    if x0 >= 2.0 / omega:
        k1 = 0.0
        area1 = 0.0
        k2 = x0 ** (lam - 1.0)
        area2 = k2 * 2.0 * np.exp(-omega * x0 / 2.0) / omega
    else:
        k1 = np.exp(-omega)
        if lam == 0.0:
            area1 = k1 * np.log(2.0 / (omega * omega))
        else:
            area1 = k1 / lam * ((2.0 / omega) ** lam - x0 ** lam)
        k2 = (2.0 / omega) ** (lam - 1.0)
        area2 = k2 * 2.0 * np.exp(-1.0) / omega
    total = area0 + area1 + area2
    tail_start = max(x0, 2.0 / omega)

    def propose(rng, size):
        v = total * rng.random(size)
        x = np.empty(size)
        hx = np.empty(size)
        r0 = v <= area0
        x[r0] = x0 * v[r0] / area0
        hx[r0] = k0
        v1 = v - area0
        r1 = ~r0 & (v1 <= area1)
        if np.any(r1):
            if lam == 0.0:
                x[r1] = omega * np.exp(np.exp(omega) * v1[r1])
                hx[r1] = k1 / x[r1]
            else:
                x[r1] = (x0 ** lam + lam / k1 * v1[r1]) ** (1.0 / lam)
                hx[r1] = k1 * x[r1] ** (lam - 1.0)
        r2 = ~r0 & ~r1
        v2 = v1[r2] - area1
        with np.errstate(divide="ignore", invalid="ignore"):
            x[r2] = -2.0 / omega * np.log(np.exp(-omega / 2.0 * tail_start) - omega / (2.0 * k2) * v2)
            hx[r2] = k2 * np.exp(-omega / 2.0 * x[r2])
            u = rng.random(size) * hx
            ok = (x > 0.0) & np.isfinite(x)
            ok &= np.log(u) <= (lam - 1.0) * np.log(x) - omega / 2.0 * (x + 1.0 / x)
        return x[ok]

    return propose


def _standard_gig_sampler(lam, omega):
    if lam > 2.0 or omega > 3.0:
        return _rou_shift(lam, omega)
    if lam >= 1.0 - 2.25 * omega * omega or omega > 0.2:
        return _rou_noshift(lam, omega)
    return _log_concave_hat(lam, omega)


def gig_sample(rng, p, count):
    """Draw ``count`` i.i.d. variates from GIG(a, b, lambda)."""
    if count < 1:
        raise DomainError("count must be >= 1")
    rng = make_rng(rng)
    a, b, lam = float(p.a), float(p.b), float(p.lam)
    omega = np.sqrt(a * b)
    scale = np.sqrt(b / a)
    x = _collect(rng, count, _standard_gig_sampler(abs(lam), omega))
    return scale / x if lam < 0.0 else scale * x


def ig_logpdf(y, p):
    y = np.asarray(y, dtype=float)
    d, g = p.delta, p.gamma
    return (np.log(d) - 0.5 * np.log(2.0 * np.pi) + d * g - 1.5 * np.log(y)
            - 0.5 * (d * d / y + g * g * y))


def ig_sample(rng, p, count):
    """IG(delta, gamma) draws via the Michael-Schucany-Haas transformation.

    numpy's Wald generator implements exactly that scheme with
    ``mean = delta/gamma`` and ``scale = delta**2``.
    """
    if count < 1:
        raise DomainError("count must be >= 1")
    rng = make_rng(rng)
    return rng.wald(p.delta / p.gamma, p.delta ** 2, size=count)


def gamma_sample(rng, p, count):
    if count < 1:
        raise DomainError("count must be >= 1")
    rng = make_rng(rng)
    return rng.gamma(p.shape, 1.0 / p.rate, size=count)
