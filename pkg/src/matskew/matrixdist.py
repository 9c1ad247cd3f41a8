"""
Matrix variate skew distributions built as matrix normal variance-mean
mixtures

    X = M + W A + sqrt(W) V,    V ~ N_{n x p}(0, Sigma, Psi),

with three laws for the scalar weight ``W``:

* ``GH(omega, lam)``: W ~ GIG(omega, omega, lam)   (the I(omega, 1, lam) law)
* ``VG(gamma)``:      W ~ gamma(shape=gamma, rate=gamma)
* ``NIG(gamma_tilde)``: W ~ IG(1, gamma_tilde)

Each weight density has the shape ``C w^{k-1} exp(-(psi_s w + chi_s / w)/2)``.
Integrating ``w`` out of the joint density therefore always gives

    log f(X) = log N-normalizer + tr(Sigma^{-1}(X-M)Psi^{-1}A') + log C + log 2
               + (nu/2) log((delta + chi_s)/(rho + psi_s))
               + log K_nu(sqrt((rho + psi_s)(delta + chi_s))),

with ``nu = k - np/2``, and ``W | X ~ GIG(rho + psi_s, delta + chi_s, nu)``.
One routine serves all three families; a family only supplies
``(psi_s, chi_s, k, log C)``.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import specfun
from .errors import BoundaryError, DimensionError, DomainError
from .matnorm import (
    MatrixParamSet,
    cross_trace,
    matnorm_mgf_trace,
    matnorm_sample,
    quad_delta,
    quad_rho,
)
from .mixing import GammaParams, GigParams, IgParams, gamma_sample, gig_sample, ig_sample
from .rng import make_rng

__all__ = [
    "GH",
    "VG",
    "NIG",
    "MatrixSkewModel",
    "mixing_from_dict",
    "logpdf",
    "posterior_gig",
    "sample",
    "mgf",
]


def _require_positive(name, value):
    if not (math.isfinite(value) and value > 0.0):
        raise DomainError(f"{name} must be finite and > 0, got {value!r}")


@dataclass(frozen=True)
class GH:
    """Generalized hyperbolic weight law, concentration ``omega``, index ``lam``."""

    omega: float
    lam: float

    tag = "gh"

    def __post_init__(self):
        _require_positive("omega", self.omega)
        if not math.isfinite(self.lam):
            raise DomainError("lambda must be finite")

    @property
    def shifts(self):
        return self.omega, self.omega

    @property
    def base_order(self):
        return self.lam

    def log_norm(self):
        return -math.log(2.0) - specfun.log_bessel_k(self.lam, self.omega)

    def mean(self):
        return specfun.bessel_k_ratio(self.lam, self.omega)

    def sample_w(self, rng, count):
        return gig_sample(rng, GigParams(self.omega, self.omega, self.lam), count)

    def log_mgf_w(self, s):
        if not self.omega - 2.0 * s > 0.0:
            raise DomainError(f"GH MGF requires omega - 2 t > 0 (omega={self.omega}, t={s})")
        arg = math.sqrt(self.omega * (self.omega - 2.0 * s))
        return (-0.5 * self.lam * math.log1p(-2.0 * s / self.omega)
                + specfun.log_bessel_k(self.lam, arg) - specfun.log_bessel_k(self.lam, self.omega))

    def to_dict(self):
        return {"family": "gh", "omega": self.omega, "lambda": self.lam}


@dataclass(frozen=True)
class VG:
    """Variance-gamma weight law gamma(gamma, gamma), so that E[W] = 1."""

    gamma: float

    tag = "vg"

    def __post_init__(self):
        _require_positive("gamma", self.gamma)

    @property
    def shifts(self):
        return 2.0 * self.gamma, 0.0

    @property
    def base_order(self):
        return self.gamma

    def log_norm(self):
        return self.gamma * math.log(self.gamma) - specfun.log_gamma_fn(self.gamma)

    def mean(self):
        return 1.0

    def sample_w(self, rng, count):
        return gamma_sample(rng, GammaParams(self.gamma, self.gamma), count)

    def log_mgf_w(self, s):
        if not s < self.gamma:
            raise DomainError(f"VG MGF requires t < gamma (gamma={self.gamma}, t={s})")
        return -self.gamma * math.log1p(-s / self.gamma)

    def to_dict(self):
        return {"family": "vg", "gamma": self.gamma}


@dataclass(frozen=True)
class NIG:
    """Normal inverse Gaussian weight law IG(1, gamma_tilde)."""

    gamma_tilde: float

    tag = "nig"

    def __post_init__(self):
        _require_positive("gamma_tilde", self.gamma_tilde)

    @property
    def shifts(self):
        return self.gamma_tilde ** 2, 1.0

    @property
    def base_order(self):
        return -0.5

    def log_norm(self):
        return -0.5 * math.log(2.0 * math.pi) + self.gamma_tilde

    def mean(self):
        return 1.0 / self.gamma_tilde

    def sample_w(self, rng, count):
        return ig_sample(rng, IgParams(1.0, self.gamma_tilde), count)

    def log_mgf_w(self, s):
        g2 = self.gamma_tilde ** 2
        if not 1.0 - 2.0 * s / g2 >= 0.0:
            raise DomainError(
                f"NIG MGF requires 2 t <= gamma_tilde^2 (gamma_tilde={self.gamma_tilde}, t={s})")
        return self.gamma_tilde * (1.0 - math.sqrt(1.0 - 2.0 * s / g2))

    def to_dict(self):
        return {"family": "nig", "gamma_tilde": self.gamma_tilde}


FAMILIES = {"gh": GH, "vg": VG, "nig": NIG}


def mixing_from_dict(d):
    family = d.get("family")
    if family == "gh":
        return GH(float(d["omega"]), float(d["lambda"]))
    if family == "vg":
        return VG(float(d["gamma"]))
    if family == "nig":
        return NIG(float(d["gamma_tilde"]))
    raise DomainError(f"unknown family {family!r}")


@dataclass(frozen=True, eq=False)
class MatrixSkewModel:
    params: MatrixParamSet
    mixing: object

    def __post_init__(self):
        if not isinstance(self.mixing, (GH, VG, NIG)):
            raise DomainError(f"unsupported mixing law {self.mixing!r}")

    @property
    def dims(self):
        return self.params.dims

    def posterior_order(self):
        n, p = self.dims
        return self.mixing.base_order - 0.5 * n * p


def _prepare(x, model):
    x = np.asarray(x, dtype=float)
    if x.shape[-2:] != model.dims or x.ndim not in (2, 3):
        raise DimensionError(f"expected ({model.dims}) matrices, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("observations must be finite")
    return x


def _terms(x, model):
    prm = model.params
    psi_s, chi_s = model.mixing.shifts
    delta = quad_delta(x, prm.m, prm.scales)
    rho = quad_rho(prm.a, prm.scales)
    return delta, rho, psi_s, chi_s


def posterior_gig(x, model):
    """Law of ``W`` given ``X`` as ``GIG(rho + psi_s, delta + chi_s, k - np/2)``.

    For a stack of observations the returned parameters hold one ``b`` per
    observation.  Raises BoundaryError when ``b`` vanishes (VG with X = M).
    """
    x = _prepare(x, model)
    delta, rho, psi_s, chi_s = _terms(x, model)
    b = delta + chi_s
    if np.any(b <= 0.0):
        raise BoundaryError("posterior GIG has b = 0 (VG family evaluated at X = M)")
    b = float(b) if np.ndim(b) == 0 else b
    return GigParams(rho + psi_s, b, model.posterior_order())


def logpdf_parts(x, model, delta_floor=0.0):
    """Log density plus the posterior GIG and its Bessel pair.

    ``delta_floor`` lifts ``delta + chi_s`` to at least that value, which is
    how the ECM fitter survives the measure-zero VG event X = M.  Returns
    ``(logpdf, GigParams, (log K_nu, log K_{nu+1}))`` for a stack.
    """
    x = _prepare(x, model)
    single = x.ndim == 2
    x = x[None] if single else x
    prm = model.params
    delta, rho, psi_s, chi_s = _terms(x, model)
    a_post = rho + psi_s
    b_post = np.maximum(delta + chi_s, delta_floor)
    nu = model.posterior_order()
    base = (prm.scales.log_normalizer() + cross_trace(x, prm.m, prm.a, prm.scales)
            + model.mixing.log_norm() + math.log(2.0))
    out = np.empty_like(delta)
    zero = b_post <= 0.0
    if np.any(zero):
        if nu <= 0.0:
            raise BoundaryError(
                f"density is infinite at X = M for order {nu} <= 0 (VG with gamma <= np/2)")
        # limit of (nu/2) log(b/a) + log K_nu(sqrt(ab)) as b -> 0
        out[zero] = base[zero] + specfun.log_gamma_fn(nu) + (nu - 1.0) * math.log(2.0) - nu * math.log(a_post)
    pos = ~zero
    k_pair = None
    if np.any(pos):
        omega = np.sqrt(a_post * b_post[pos])
        k0, k1 = specfun.log_bessel_k_pair(np.full(omega.shape, nu), omega)
        out[pos] = base[pos] + 0.5 * nu * (np.log(b_post[pos]) - math.log(a_post)) + k0
        if np.all(pos):
            k_pair = (k0, k1)
    post = GigParams(a_post, b_post, nu) if np.all(pos) else None
    if single:
        out = float(out[0])
    return out, post, k_pair


def logpdf(x, model):
    """Log density of the model's family at one matrix or a stack of matrices."""
    return logpdf_parts(x, model)[0]


def sample(rng, model, count):
    """``count`` draws as an array of shape ``(count, n, p)``."""
    if count < 1:
        raise DomainError("count must be >= 1")
    rng = make_rng(rng)
    prm = model.params
    w = model.mixing.sample_w(rng, count)
    v = matnorm_sample(rng, np.zeros(model.dims), prm.scales, count)
    return prm.m + w[:, None, None] * prm.a + np.sqrt(w)[:, None, None] * v


def mgf(t, model):
    """``E exp(tr(T'X))``; DomainError outside the family's existence region."""
    first, second = matnorm_mgf_trace(t, model.params)
    return math.exp(first + model.mixing.log_mgf_w(second))
