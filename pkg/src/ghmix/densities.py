"""
Log-densities of the generalized hyperbolic family.

All component parameters live in rotated coordinates: the location
``mu`` and skewness ``beta`` refer to ``y = Gamma' x``, and the scale is
the diagonal ``Phi`` of the eigen-decomposition
``Sigma = Gamma Phi Gamma'``.  Because ``Gamma`` is orthogonal the
Jacobian of the rotation is 1, so every density below can be evaluated
entirely on ``y`` without forming ``Sigma``.

Three component laws share one parameter record:

* the generalized hyperbolic density, driven by one latent weight with
  concentration ``omega0`` and index ``lambda0``;
* the multiple-scaled variant, with an independent latent weight per
  rotated coordinate (vectors ``omega_vec``, ``lambda_vec``), whose
  density is the product of univariate generalized hyperbolic factors;
* their two-point mixture with inner weight ``varpi`` (the coalesced
  law), which degenerates exactly to either end point at
  ``varpi`` = 1 or 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from ghmix.bessel import log_bessel_k

__all__ = [
    "FAMILIES",
    "CGHDComponent",
    "MixtureModel",
    "mahalanobis",
    "ghd_log_density",
    "msghd_log_density",
    "cghd_log_density",
    "mixture_log_density",
    "ghd_log_density_batch",
    "msghd_log_density_batch",
    "cghd_log_density_batch",
    "mixture_log_density_batch",
]

FAMILIES = ("mghd", "mmsghd", "mcmsghd", "mcghd")

_LOG_2PI = np.log(2.0 * np.pi)
_ORTHO_TOL = 1e-10


@dataclass
class CGHDComponent:
    """One mixture component, shared by all three sub-densities."""

    mu: np.ndarray
    gamma: np.ndarray
    phi: np.ndarray
    beta: np.ndarray
    omega_vec: np.ndarray
    lambda_vec: np.ndarray
    omega0: float
    lambda0: float
    varpi: float

    def __post_init__(self):
        self.mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.phi = np.atleast_1d(np.asarray(self.phi, dtype=float))
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        self.omega_vec = np.atleast_1d(np.asarray(self.omega_vec, dtype=float))
        self.lambda_vec = np.atleast_1d(np.asarray(self.lambda_vec, dtype=float))
        self.omega0 = float(self.omega0)
        self.lambda0 = float(self.lambda0)
        self.varpi = float(self.varpi)
        self.validate()

    @property
    def p(self) -> int:
        return self.mu.shape[0]

    def validate(self):
        p = self.mu.shape[0]
        for name in ("phi", "beta", "omega_vec", "lambda_vec"):
            if getattr(self, name).shape != (p,):
                raise ValueError(f"{name} must have shape ({p},)")
        if self.gamma.shape != (p, p):
            raise ValueError(f"gamma must have shape ({p}, {p})")
        err = np.max(np.abs(self.gamma.T @ self.gamma - np.eye(p)))
        if err > _ORTHO_TOL:
            raise ValueError(f"gamma is not orthogonal (deviation {err:.2e})")
        if np.any(self.phi <= 0.0) or np.any(self.omega_vec <= 0.0) or self.omega0 <= 0.0:
            raise ValueError("phi, omega_vec and omega0 must be > 0")
        if not 0.0 <= self.varpi <= 1.0:
            raise ValueError("varpi must lie in [0, 1]")

    def ambient_location(self) -> np.ndarray:
        """Location in data coordinates, ``Gamma mu``."""
        return self.gamma @ self.mu


@dataclass
class MixtureModel:
    """Family tag, mixing proportions, and G shared-parameter components."""

    family: str
    pi: np.ndarray
    components: list = field(default_factory=list)

    def __post_init__(self):
        self.pi = np.atleast_1d(np.asarray(self.pi, dtype=float))
        self.validate()

    @property
    def G(self) -> int:
        return len(self.components)

    @property
    def p(self) -> int:
        return self.components[0].p

    def validate(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.pi.shape != (len(self.components),):
            raise ValueError("pi must have one entry per component")
        if abs(self.pi.sum() - 1.0) > 1e-12 or np.any(self.pi <= 0.0):
            raise ValueError("mixing proportions must be positive and sum to 1")
        for comp in self.components:
            if self.family == "mghd" and comp.varpi != 1.0:
                raise ValueError("mghd components must have varpi = 1")
            if self.family in ("mmsghd", "mcmsghd") and comp.varpi != 0.0:
                raise ValueError(f"{self.family} components must have varpi = 0")
            if self.family == "mcmsghd" and np.any(comp.lambda_vec <= 1.0):
                raise ValueError("mcmsghd requires every lambda_vec entry > 1")

    def copy(self) -> "MixtureModel":
        comps = [replace(c) for c in self.components]
        return MixtureModel(self.family, self.pi.copy(), comps)


def _as_batch(x, p):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if x.shape[0] != p:
            raise ValueError(f"expected a {p}-vector, got shape {x.shape}")
        return x[None, :], True
    if x.ndim == 2 and x.shape[1] == p:
        return x, False
    raise ValueError(f"expected (n, {p}) data, got shape {x.shape}")


def mahalanobis_batch(X, comp: CGHDComponent) -> np.ndarray:
    dy = X @ comp.gamma - comp.mu
    return np.sum(dy * dy / comp.phi, axis=1)


def mahalanobis(x, comp: CGHDComponent) -> float:
    """Squared Mahalanobis distance under ``Sigma = Gamma Phi Gamma'``."""
    X, _ = _as_batch(x, comp.p)
    return float(mahalanobis_batch(X, comp)[0])


def ghd_log_density_batch(X, comp: CGHDComponent) -> np.ndarray:
    """Generalized hyperbolic log-density of each row of ``X``."""
    p = comp.p
    dy = X @ comp.gamma - comp.mu
    delta = np.sum(dy * dy / comp.phi, axis=1)
    skew_form = float(np.sum(comp.beta * comp.beta / comp.phi))
    slin = dy @ (comp.beta / comp.phi)

    d = comp.omega0 + skew_form
    e = comp.omega0 + delta
    nu = comp.lambda0 - 0.5 * p
    arg = np.sqrt(d * e)
    return (
        0.5 * nu * (np.log(e) - np.log(d))
        + log_bessel_k(nu, arg)
        - 0.5 * p * _LOG_2PI
        - 0.5 * np.sum(np.log(comp.phi))
        - log_bessel_k(comp.lambda0, comp.omega0)
        + slin
    )


def msghd_log_density_batch(X, comp: CGHDComponent) -> np.ndarray:
    """Multiple-scaled log-density: sum of univariate hyperbolic factors
    along the rotated coordinates."""
    dy = X @ comp.gamma - comp.mu
    dbar = comp.omega_vec + comp.beta * comp.beta / comp.phi
    ebar = comp.omega_vec + dy * dy / comp.phi
    nu = comp.lambda_vec - 0.5
    arg = np.sqrt(dbar * ebar)
    per_coord = (
        0.5 * nu * (np.log(ebar) - np.log(dbar))
        + log_bessel_k(nu, arg)
        - 0.5 * _LOG_2PI
        - 0.5 * np.log(comp.phi)
        - log_bessel_k(comp.lambda_vec, comp.omega_vec)
        + dy * (comp.beta / comp.phi)
    )
    return per_coord.sum(axis=1)


def cghd_log_density_batch(X, comp: CGHDComponent) -> np.ndarray:
    """Coalesced log-density: inner two-point mixture via log-sum-exp,
    exact at the degenerate inner weights."""
    if comp.varpi >= 1.0:
        return ghd_log_density_batch(X, comp)
    if comp.varpi <= 0.0:
        return msghd_log_density_batch(X, comp)
    lgh = ghd_log_density_batch(X, comp)
    lms = msghd_log_density_batch(X, comp)
    return np.logaddexp(np.log(comp.varpi) + lgh, np.log1p(-comp.varpi) + lms)


def mixture_log_density_batch(X, model: MixtureModel) -> np.ndarray:
    """Mixture log-density of each row of ``X`` via log-sum-exp over
    components."""
    stacked = np.stack(
        [np.log(model.pi[g]) + cghd_log_density_batch(X, model.components[g])
         for g in range(model.G)]
    )
    return logsumexp(stacked, axis=0)


def ghd_log_density(x, comp: CGHDComponent) -> float:
    X, _ = _as_batch(x, comp.p)
    return float(ghd_log_density_batch(X, comp)[0])


def msghd_log_density(x, comp: CGHDComponent) -> float:
    X, _ = _as_batch(x, comp.p)
    return float(msghd_log_density_batch(X, comp)[0])


def cghd_log_density(x, comp: CGHDComponent) -> float:
    X, _ = _as_batch(x, comp.p)
    return float(cghd_log_density_batch(X, comp)[0])


def mixture_log_density(x, model: MixtureModel) -> float:
    X, _ = _as_batch(x, model.p)
    return float(mixture_log_density_batch(X, model)[0])
