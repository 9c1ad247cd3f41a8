"""
ECM maximum likelihood fitting for the matrix variate GH, VG and NIG laws.

One sweep is

1. E-step: ``a_i, b_i, c_i = E[W | X_i], E[1/W | X_i], E[log W | X_i]``
   from the GIG posterior of each observation;
2. CM1: closed-form joint update of the location ``M`` and skewness ``A``;
3. CM2: row scale ``Sigma`` given the current ``Psi``;
4. CM3: column scale ``Psi`` given the new ``Sigma``;
5. the family step (GH: ``lam`` then ``omega``; VG: ``gamma``; NIG: ``gamma_tilde``);
6. rescaling to ``Sigma[0, 0] = 1``;

followed by an Aitken-extrapolated stopping test on the observed
log-likelihood.  Every CM step maximizes (or, for GH, increases) the
expected complete-data log-likelihood, so the observed log-likelihood never
decreases; ``fit`` checks this on every iteration.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from . import specfun
from .errors import DegenerateWeightsError, DimensionError, DomainError, FitError, NoRootError
from .matnorm import MatrixParamSet, quad_delta
from .matrixdist import GH, NIG, VG, MatrixSkewModel, logpdf, logpdf_parts, mixing_from_dict
from .mixing import gig_moments
from .rng import make_rng

__all__ = [
    "PosteriorMoments",
    "FitConfig",
    "FitResult",
    "e_step",
    "cm_update_location_skew",
    "cm_update_sigma",
    "cm_update_psi",
    "cm_update_gh",
    "gh_surrogate",
    "gh_surrogate_partials",
    "cm_update_vg",
    "cm_update_nig",
    "canonicalize",
    "observed_loglik",
    "aitken_check",
    "initialize",
    "fit",
]

ASCENT_SLACK = 1e-8
VG_GAMMA_BOUNDS = (1e-8, 1e8)
DEFAULT_DELTA_FLOOR = 1e-300
COLLAPSE_TOL = 1e-12


@dataclass(frozen=True)
class PosteriorMoments:
    """Per-observation ``E[W|X]``, ``E[1/W|X]``, ``E[log W|X]``."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @property
    def a_bar(self):
        return float(np.mean(self.a))

    @property
    def b_bar(self):
        return float(np.mean(self.b))

    @property
    def c_bar(self):
        return float(np.mean(self.c))

    def __len__(self):
        return len(self.a)


@dataclass
class FitConfig:
    family: str = "vg"
    epsilon: float = 1e-6
    max_iter: int = 2000
    init_seed: int = 0
    jitter: float = 1e-10
    init_mixing: object = None
    delta_floor: float = DEFAULT_DELTA_FLOOR

    def __post_init__(self):
        if self.family not in ("gh", "vg", "nig"):
            raise DomainError(f"unknown family {self.family!r}")
        if not self.epsilon > 0:
            raise DomainError("epsilon must be > 0")
        if self.max_iter < 1:
            raise DomainError("max_iter must be >= 1")
        if self.jitter < 0:
            raise DomainError("jitter must be >= 0")

    def starting_mixing(self):
        if self.init_mixing is not None:
            if self.init_mixing.tag != self.family:
                raise DomainError("init_mixing does not match family")
            return self.init_mixing
        return {"gh": GH(1.0, 0.5), "vg": VG(1.0), "nig": NIG(1.0)}[self.family]


@dataclass
class FitResult:
    model: MatrixSkewModel
    loglik_trace: list
    iterations: int
    converged: bool
    aitken_bound: float
    notes: list = field(default_factory=list)

    @property
    def loglik(self):
        return self.loglik_trace[-1]

    def to_dict(self):
        prm = self.model.params
        bound = self.aitken_bound
        return {
            "family": self.model.mixing.tag,
            "n": prm.dims[0],
            "p": prm.dims[1],
            "m": prm.m.tolist(),
            "a": prm.a.tolist(),
            "sigma": prm.sigma.tolist(),
            "psi": prm.psi.tolist(),
            "mixing": self.model.mixing.to_dict(),
            "loglik": self.loglik,
            "loglik_trace": list(self.loglik_trace),
            "iterations": self.iterations,
            "converged": self.converged,
            "aitken_bound": None if bound is None or not math.isfinite(bound) else bound,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d):
        params = MatrixParamSet(d["m"], d["a"], d["sigma"], d["psi"])
        return cls(
            model=MatrixSkewModel(params, mixing_from_dict(d["mixing"])),
            loglik_trace=list(d["loglik_trace"]),
            iterations=int(d["iterations"]),
            converged=bool(d["converged"]),
            aitken_bound=float("nan") if d.get("aitken_bound") is None else d["aitken_bound"],
            notes=list(d.get("notes", [])),
        )


def as_dataset(dataset):
    x = np.asarray(dataset, dtype=float)
    if x.ndim != 3 or x.shape[0] == 0:
        raise DimensionError("dataset must be a non-empty stack of n x p matrices")
    if not np.all(np.isfinite(x)):
        raise DomainError("dataset contains non-finite values")
    return x


def _collapsed_observation(x, model):
    """Index of an observation the VG location has collapsed onto, else None.

    With ``gamma < np/2`` the VG density is unbounded at ``X = M``, so the
    likelihood can be driven to infinity by moving ``M`` onto one data point.
    A relative distance below ``COLLAPSE_TOL`` is treated as that event.
    """
    if model.mixing.tag != "vg" or model.posterior_order() > 0.0:
        return None
    delta = quad_delta(x, model.params.m, model.params.scales)
    i = int(np.argmin(delta))
    if delta[i] < COLLAPSE_TOL * float(np.mean(delta)):
        return i
    return None


def _evaluate(x, model, delta_floor=DEFAULT_DELTA_FLOOR):
    """Observed log-likelihood and the E-step moments for the same parameters."""
    psi_s, chi_s = model.mixing.shifts
    if chi_s == 0.0:
        delta = quad_delta(x, model.params.m, model.params.scales)
        if np.any(delta < delta_floor):
            warnings.warn(
                f"{int(np.sum(delta < delta_floor))} observation(s) at the location; "
                f"posterior b floored at {delta_floor:g}",
                RuntimeWarning,
                stacklevel=3,
            )
    logp, post, k_pair = logpdf_parts(x, model, delta_floor=delta_floor)
    mom = gig_moments(post, k_pair)
    return float(np.sum(logp)), PosteriorMoments(np.asarray(mom.e_w), np.asarray(mom.e_winv),
                                                 np.asarray(mom.e_logw))


def e_step(dataset, model, delta_floor=DEFAULT_DELTA_FLOOR):
    """Posterior moments of the weights under ``model``."""
    return _evaluate(as_dataset(dataset), model, delta_floor)[1]


def cm_update_location_skew(dataset, moments):
    """Joint maximizer of the expected complete-data log-likelihood in (M, A).

    Raises DegenerateWeightsError when ``sum_i a_bar b_i - N`` is (relatively)
    zero, which happens only when the weights are a.s. constant.
    """
    x = as_dataset(dataset)
    n_obs = len(x)
    a_bar = moments.a_bar
    b = np.asarray(moments.b)
    denom = a_bar * float(np.sum(b)) - n_obs
    if abs(denom) < 1e-10 * n_obs:
        raise DegenerateWeightsError(f"location/skewness denominator is {denom:g}")
    m_hat = np.tensordot(a_bar * b - 1.0, x, axes=1) / denom
    a_hat = np.tensordot(moments.b_bar - b, x, axes=1) / denom
    return m_hat, a_hat


def _spd_repair(s, jitter, name):
    s = 0.5 * (s + s.T)
    bump = jitter * float(np.mean(np.diag(s)))
    for attempt in range(4):
        try:
            linalg.cholesky(s, lower=True)
            return s
        except linalg.LinAlgError:
            if attempt == 3 or bump <= 0.0:
                break
            s = s + bump * np.eye(len(s))
            bump *= 10.0
    raise FitError(f"{name} update is not positive definite after jitter")


def cm_update_sigma(dataset, moments, m_hat, a_hat, psi_inv, jitter=1e-10):
    """Row-scale update given the column scale (through ``psi_inv``)."""
    x = as_dataset(dataset)
    n_obs, n, p = x.shape
    d = x - m_hat
    b = np.asarray(moments.b)
    a = np.asarray(moments.a)
    dp = d @ psi_inv
    s = np.einsum("i,ijk,imk->jm", b, dp, d)
    cross = a_hat @ psi_inv @ d.sum(axis=0).T
    s = s - cross - cross.T + float(np.sum(a)) * (a_hat @ psi_inv @ a_hat.T)
    return _spd_repair(s / (n_obs * p), jitter, "Sigma")


def cm_update_psi(dataset, moments, m_hat, a_hat, sigma_inv, jitter=1e-10):
    """Column-scale update given the (already updated) row scale."""
    x = as_dataset(dataset)
    n_obs, n, p = x.shape
    d = x - m_hat
    b = np.asarray(moments.b)
    a = np.asarray(moments.a)
    sd = sigma_inv @ d
    s = np.einsum("i,ikj,ikm->jm", b, d, sd)
    cross = a_hat.T @ sigma_inv @ d.sum(axis=0)
    s = s - cross - cross.T + float(np.sum(a)) * (a_hat.T @ sigma_inv @ a_hat)
    return _spd_repair(s / (n_obs * n), jitter, "Psi")


def gh_surrogate(moments, lam, omega):
    """Per-observation expected log weight density of GH, up to a constant.

    ``q(lam, omega) = -log K_lam(omega) + lam c_bar - omega (a_bar + b_bar) / 2``
    """
    return (-specfun.log_bessel_k(lam, omega) + lam * moments.c_bar
            - 0.5 * omega * (moments.a_bar + moments.b_bar))


def gh_surrogate_partials(moments, lam, omega):
    """First and second derivatives of ``gh_surrogate`` in ``omega``."""
    r_pos = specfun.bessel_k_ratio(lam, omega)
    r_neg = specfun.bessel_k_ratio(-lam, omega)
    first = 0.5 * (r_pos + r_neg - (moments.a_bar + moments.b_bar))
    second = 0.5 * (r_pos ** 2 - (1.0 + 2.0 * lam) / omega * r_pos - 1.0
                    + r_neg ** 2 - (1.0 - 2.0 * lam) / omega * r_neg - 1.0)
    return first, second


def cm_update_gh(moments, omega_t, lambda_t, max_halvings=50):
    """GH family step: index update, then one safeguarded Newton step in omega.

    The index update is ``lam' = c_bar lam / (d/ds log K_s(omega))|_{s=lam}``.
    Both proposals are pulled back toward the current value by halving until
    the surrogate does not decrease; if no such point is found the current
    value is kept.
    """
    q_now = gh_surrogate(moments, lambda_t, omega_t)
    lam_new = lambda_t
    slope = specfun.dlog_bessel_k_dorder(lambda_t, omega_t)
    if abs(slope) > 1e-12:
        proposal = moments.c_bar * lambda_t / slope
        step = proposal - lambda_t
        for _ in range(max_halvings):
            cand = lambda_t + step
            if math.isfinite(cand):
                q_cand = gh_surrogate(moments, cand, omega_t)
                if q_cand >= q_now:
                    lam_new, q_now = cand, q_cand
                    break
            step *= 0.5

    omega_new = omega_t
    first, second = gh_surrogate_partials(moments, lam_new, omega_t)
    if math.isfinite(first) and math.isfinite(second) and second < 0.0 and first != 0.0:
        step = -first / second
        for _ in range(max_halvings):
            cand = omega_t + step
            if cand > 0.0 and gh_surrogate(moments, lam_new, cand) >= q_now:
                omega_new = cand
                break
            step *= 0.5
    return lam_new, omega_new


def cm_update_vg(moments):
    """Root of ``log g + 1 - digamma(g) + c_bar - a_bar = 0`` in ``g > 0``.

    The left side decreases strictly from +inf to ``1 + c_bar - a_bar``, so a
    root exists iff ``a_bar - c_bar > 1``.  The root is bracketed on
    ``[1e-8, 1e8]``; when it lies above the upper end the cap is returned.
    """
    target = moments.a_bar - moments.c_bar
    if not target > 1.0:
        raise NoRootError(f"a_bar - c_bar = {target:.6g} <= 1: no positive root")
    lo, hi = (math.log(v) for v in VG_GAMMA_BOUNDS)

    def resid(log_g):
        g = math.exp(log_g)
        return log_g + 1.0 - specfun.digamma(g) - target

    if resid(hi) > 0.0:
        return VG_GAMMA_BOUNDS[1]
    if resid(lo) < 0.0:
        return VG_GAMMA_BOUNDS[0]
    root = optimize.brentq(resid, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    return math.exp(root)


def cm_update_nig(moments):
    """``N / sum_i a_i``."""
    return len(moments.a) / float(np.sum(moments.a))


def canonicalize(sigma, psi):
    """Rescale so that ``sigma[0, 0] == 1``; ``psi kron sigma`` is unchanged."""
    sigma = np.asarray(sigma, dtype=float)
    psi = np.asarray(psi, dtype=float)
    c = sigma[0, 0]
    assert c > 0.0, "Sigma[0, 0] must be positive"
    return sigma / c, psi * c


def observed_loglik(dataset, model):
    return float(np.sum(logpdf(as_dataset(dataset), model)))


def aitken_check(loglik_trace, epsilon):
    """Aitken-accelerated stopping rule on the last three log-likelihoods.

    Returns ``(converged, l_inf)``.  With ``l_{t-1}, l_t, l_{t+1}`` the last
    three values, ``a = (l_{t+1} - l_t) / (l_t - l_{t-1})`` and
    ``l_inf = l_t + (l_{t+1} - l_t) / (1 - a)``; the rule fires when
    ``0 <= l_inf - l_t < epsilon``.  ``l_inf`` is NaN when the acceleration is
    undefined (``a >= 1`` or a zero denominator); an exactly flat step counts
    as converged.
    """
    if len(loglik_trace) < 3:
        raise ValueError("Aitken check needs at least three log-likelihood values")
    l_prev, l_cur, l_next = (float(v) for v in loglik_trace[-3:])
    num = l_next - l_cur
    denom = l_cur - l_prev
    if num == 0.0:
        return True, float("nan")
    if denom == 0.0:
        return False, float("nan")
    accel = num / denom
    if accel >= 1.0:
        return False, float("nan")
    l_inf = l_cur + num / (1.0 - accel)
    diff = l_inf - l_cur
    return bool(0.0 <= diff < epsilon), l_inf


def initialize(dataset, config):
    """Deterministic starting values.

    ``M`` is the sample mean; ``A`` is ``0.1`` times the sign of the sample
    third central moment (ties broken by a generator seeded with
    ``config.init_seed``); ``Sigma`` and ``Psi`` come from the row and column
    scatter of the centred data, then rescaled to canonical form.
    """
    x = as_dataset(dataset)
    n_obs, n, p = x.shape
    m0 = x.mean(axis=0)
    d = x - m0
    sign = np.sign(np.mean(d ** 3, axis=0))
    ties = sign == 0.0
    if np.any(ties):
        rng = make_rng(config.init_seed)
        sign[ties] = rng.choice([-1.0, 1.0], size=int(ties.sum()))
    a0 = 0.1 * sign
    sigma0 = _spd_repair(np.einsum("ijk,imk->jm", d, d) / (n_obs * p), max(config.jitter, 1e-10), "Sigma")
    sigma0_inv = linalg.inv(sigma0)
    psi0 = _spd_repair(np.einsum("ikj,kl,ilm->jm", d, sigma0_inv, d) / (n_obs * n),
                       max(config.jitter, 1e-10), "Psi")
    sigma0, psi0 = canonicalize(sigma0, psi0)
    return MatrixSkewModel(MatrixParamSet(m0, a0, sigma0, psi0), config.starting_mixing())


def _family_step(mixing, moments):
    if isinstance(mixing, GH):
        lam, omega = cm_update_gh(moments, mixing.omega, mixing.lam)
        return GH(omega, lam)
    if isinstance(mixing, VG):
        try:
            return VG(cm_update_vg(moments))
        except NoRootError as exc:
            warnings.warn(f"gamma held: {exc}", RuntimeWarning, stacklevel=3)
            return mixing
    return NIG(cm_update_nig(moments))


def fit(dataset, config=None, init=None):
    """Run the ECM algorithm until the Aitken rule fires or ``max_iter`` sweeps.

    Parameters
    ----------
    dataset : array_like, shape (N, n, p)
    config : FitConfig, optional
    init : MatrixSkewModel, optional
        Starting model; ``initialize(dataset, config)`` when omitted.

    Returns
    -------
    FitResult
        The final model is in canonical form (``Sigma[0, 0] == 1``).

    Raises
    ------
    FitError
        On a non-finite log-likelihood, a failed scale update, or a decrease
        of the log-likelihood by more than ``1e-8``.
    """
    config = config or FitConfig()
    x = as_dataset(dataset)
    model = init if init is not None else initialize(x, config)
    if model.mixing.tag != config.family:
        raise DomainError("initial model family does not match config.family")
    notes = []
    loglik, moments = _evaluate(x, model, config.delta_floor)
    if not math.isfinite(loglik):
        raise FitError("initial log-likelihood is not finite", 0)
    trace = [loglik]
    converged = False
    bound = float("nan")
    iteration = 0
    for iteration in range(1, config.max_iter + 1):
        prm = model.params
        try:
            m_hat, a_hat = cm_update_location_skew(x, moments)
        except DegenerateWeightsError as exc:
            notes.append(f"iteration {iteration}: M, A held ({exc})")
            m_hat, a_hat = prm.m, prm.a
        try:
            sigma = cm_update_sigma(x, moments, m_hat, a_hat, prm.scales.psi_inv, config.jitter)
            sigma_inv = linalg.inv(sigma)
            sigma_inv = 0.5 * (sigma_inv + sigma_inv.T)
            psi = cm_update_psi(x, moments, m_hat, a_hat, sigma_inv, config.jitter)
        except FitError as exc:
            raise FitError(str(exc), iteration) from exc
        mixing = _family_step(model.mixing, moments)
        sigma, psi = canonicalize(sigma, psi)
        try:
            model = MatrixSkewModel(MatrixParamSet(m_hat, a_hat, sigma, psi), mixing)
            loglik, moments = _evaluate(x, model, config.delta_floor)
        except (DomainError, ValueError) as exc:
            raise FitError(f"evaluation failed: {exc}", iteration) from exc
        if not math.isfinite(loglik):
            raise FitError("log-likelihood is not finite", iteration)
        hit = _collapsed_observation(x, model)
        if hit is not None:
            raise FitError(
                f"location collapsed onto observation {hit}: the VG likelihood is unbounded "
                f"there for gamma = {model.mixing.gamma:.4g} < np/2", iteration)
        if loglik < trace[-1] - ASCENT_SLACK:
            raise FitError(
                f"log-likelihood decreased from {trace[-1]!r} to {loglik!r}", iteration)
        trace.append(loglik)
        if len(trace) >= 3:
            converged, bound = aitken_check(trace, config.epsilon)
            if converged:
                break
    return FitResult(model, trace, iteration, converged, bound, notes)
