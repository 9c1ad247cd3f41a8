"""
Matrix variate normal building blocks.

``N_{n x p}(M, Sigma, Psi)`` has density

    (2 pi)^{-np/2} |Sigma|^{-p/2} |Psi|^{-n/2}
        exp(-tr(Sigma^{-1} (X - M) Psi^{-1} (X - M)') / 2)

and ``vec(X) ~ N_{np}(vec(M), Psi kron Sigma)``.  The two trace forms

    delta(X; M, Sigma, Psi) = tr(Sigma^{-1} (X-M) Psi^{-1} (X-M)')
    rho(A, Sigma, Psi)      = tr(Sigma^{-1} A Psi^{-1} A')

are computed through whitened matrices ``L_Sigma^{-1} D L_Psi^{-T}`` so they
are non-negative by construction.  Functions accept a single ``(n, p)``
matrix or a stack of shape ``(N, n, p)``.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DimensionError, DomainError
from .rng import make_rng

__all__ = [
    "MatrixParamSet",
    "ScaleFactors",
    "matnorm_logpdf",
    "matnorm_sample",
    "quad_delta",
    "quad_rho",
    "cross_trace",
    "matnorm_mgf_trace",
]

LOG_2PI = np.log(2.0 * np.pi)


def _cholesky(mat, name):
    try:
        return linalg.cholesky(mat, lower=True)
    except linalg.LinAlgError as exc:
        raise DomainError(f"{name} is not positive definite") from exc


def _check_square_symmetric(mat, name):
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise DomainError(f"{name} has non-finite entries")
    scale = max(np.max(np.abs(mat)), 1e-300)
    if np.max(np.abs(mat - mat.T)) > 1e-10 * scale:
        raise DomainError(f"{name} is not symmetric")


@dataclass(frozen=True, eq=False)
class ScaleFactors:
    """Cached factorizations of the row and column scale matrices."""

    sigma_chol: np.ndarray
    psi_chol: np.ndarray
    sigma_inv: np.ndarray
    psi_inv: np.ndarray
    sigma_chol_inv: np.ndarray
    psi_chol_inv: np.ndarray
    logdet_sigma: float
    logdet_psi: float

    @classmethod
    def from_matrices(cls, sigma, psi):
        sigma = np.asarray(sigma, dtype=float)
        psi = np.asarray(psi, dtype=float)
        _check_square_symmetric(sigma, "Sigma")
        _check_square_symmetric(psi, "Psi")
        ls = _cholesky(sigma, "Sigma")
        lp = _cholesky(psi, "Psi")
        ls_inv = linalg.solve_triangular(ls, np.eye(len(ls)), lower=True)
        lp_inv = linalg.solve_triangular(lp, np.eye(len(lp)), lower=True)
        return cls(
            sigma_chol=ls,
            psi_chol=lp,
            sigma_inv=ls_inv.T @ ls_inv,
            psi_inv=lp_inv.T @ lp_inv,
            sigma_chol_inv=ls_inv,
            psi_chol_inv=lp_inv,
            logdet_sigma=2.0 * float(np.sum(np.log(np.diag(ls)))),
            logdet_psi=2.0 * float(np.sum(np.log(np.diag(lp)))),
        )

    @property
    def n(self):
        return self.sigma_chol.shape[0]

    @property
    def p(self):
        return self.psi_chol.shape[0]

    @property
    def sigma(self):
        return self.sigma_chol @ self.sigma_chol.T

    @property
    def psi(self):
        return self.psi_chol @ self.psi_chol.T

    def whiten(self, d):
        """``L_Sigma^{-1} D L_Psi^{-T}`` for one matrix or a stack."""
        return self.sigma_chol_inv @ d @ self.psi_chol_inv.T

    def log_normalizer(self):
        """``-(np/2) log 2pi - (p/2) log|Sigma| - (n/2) log|Psi|``."""
        n, p = self.n, self.p
        return -0.5 * n * p * LOG_2PI - 0.5 * p * self.logdet_sigma - 0.5 * n * self.logdet_psi


@dataclass(frozen=True, eq=False)
class MatrixParamSet:
    """Location ``m``, skewness ``a`` (both n x p), row scale ``sigma``, column scale ``psi``."""

    m: np.ndarray
    a: np.ndarray
    sigma: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        for name in ("m", "a", "sigma", "psi"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
        if self.m.ndim != 2:
            raise DimensionError("M must be an n x p matrix")
        if self.a.shape != self.m.shape:
            raise DimensionError(f"A has shape {self.a.shape}, expected {self.m.shape}")
        n, p = self.m.shape
        if self.sigma.shape != (n, n):
            raise DimensionError(f"Sigma has shape {self.sigma.shape}, expected {(n, n)}")
        if self.psi.shape != (p, p):
            raise DimensionError(f"Psi has shape {self.psi.shape}, expected {(p, p)}")
        if not (np.all(np.isfinite(self.m)) and np.all(np.isfinite(self.a))):
            raise DomainError("M and A must be finite")
        # validates symmetry and positive definiteness
        object.__setattr__(self, "_scales", ScaleFactors.from_matrices(self.sigma, self.psi))

    @property
    def dims(self):
        return self.m.shape

    @property
    def scales(self):
        return self._scales


def _check_point(x, m):
    x = np.asarray(x, dtype=float)
    if x.shape[-2:] != m.shape:
        raise DimensionError(f"observation shape {x.shape[-2:]} does not match {m.shape}")
    return x


def quad_delta(x, m, scales):
    """``tr(Sigma^{-1} (X-M) Psi^{-1} (X-M)')``; vectorized over a leading axis."""
    m = np.asarray(m, dtype=float)
    x = _check_point(x, m)
    z = scales.whiten(x - m)
    return np.sum(z * z, axis=(-2, -1))


def quad_rho(a, scales):
    """``tr(Sigma^{-1} A Psi^{-1} A')``."""
    z = scales.whiten(np.asarray(a, dtype=float))
    return float(np.sum(z * z))


def cross_trace(x, m, a, scales):
    """``tr(Sigma^{-1} (X-M) Psi^{-1} A')``; vectorized over a leading axis."""
    m = np.asarray(m, dtype=float)
    x = _check_point(x, m)
    zd = scales.whiten(x - m)
    za = scales.whiten(np.asarray(a, dtype=float))
    return np.sum(zd * za, axis=(-2, -1))


def matnorm_logpdf(x, m, scales):
    """Matrix normal log density at ``x`` (one matrix or a stack)."""
    out = scales.log_normalizer() - 0.5 * quad_delta(x, m, scales)
    return float(out) if np.ndim(out) == 0 else out


def matnorm_sample(rng, m, scales, count=None):
    """``M + L_Sigma Z L_Psi'`` with i.i.d. standard normal ``Z``.

    Returns one ``(n, p)`` matrix when ``count`` is None, otherwise a stack
    of shape ``(count, n, p)``.
    """
    rng = make_rng(rng)
    m = np.asarray(m, dtype=float)
    shape = m.shape if count is None else (count,) + m.shape
    z = rng.standard_normal(shape)
    return m + scales.sigma_chol @ z @ scales.psi_chol.T


def matnorm_mgf_trace(t, params):
    """The two scalars a matrix normal variance-mean mixture MGF depends on.

    Returns ``(tr(T'M), tr(T'A) + tr(T' Sigma T Psi) / 2)``: given ``W = w``
    the log-MGF of the mixture is ``tr(T'M) + w * second``.
    """
    t = np.asarray(t, dtype=float)
    if t.shape != params.m.shape:
        raise DimensionError(f"T has shape {t.shape}, expected {params.m.shape}")
    first = float(np.sum(t * params.m))
    second = float(np.sum(t * params.a)) + 0.5 * float(np.trace(t.T @ params.sigma @ t @ params.psi))
    return first, second
