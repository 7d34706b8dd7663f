"""
Generalized EM engine for the hyperbolic mixture family.

One iteration sweeps: E-step (responsibilities, inner-branch
posteriors, and all latent GIG conditional moments) followed by
conditional M-steps for the mixing weights, location/skewness, the
diagonal scale, the eigenvector matrix (a majorize-minimize update
solved by SVD), and the GIG concentration/index parameters (one
guarded Newton / fixed-point step each).  Every non-closed-form update
is accepted only if its own objective does not decrease, so the
observed-data log-likelihood is monotone up to floating-point noise.

Stopping uses Aitken acceleration of the log-likelihood sequence.
Semi-supervised variants fix the labelled rows' responsibilities to
indicators throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.vq import ClusterError, kmeans2
from scipy.special import expit, logsumexp

from ghmix.bessel import dlog_bessel_k_dnu, log_bessel_k, log_bessel_k_ratio, log_k_triple
from ghmix.densities import FAMILIES, CGHDComponent, MixtureModel, cghd_log_density_batch

__all__ = [
    "FitError",
    "DegenerateFitError",
    "NumericFitError",
    "FitConfig",
    "EStepCache",
    "SufficientStats",
    "FitResult",
    "kmeans_init",
    "e_step",
    "compute_sufficient_stats",
    "m_step_mixing",
    "m_step_location_skewness",
    "m_step_phi",
    "m_step_gamma",
    "m_step_gig_hyper",
    "gamma_objective",
    "aitken_converged",
    "fit",
    "fit_classification",
    "fit_discriminant",
    "posterior_responsibilities",
]

_LOG_2PI = np.log(2.0 * np.pi)
_OMEGA_MIN, _OMEGA_MAX = 1e-6, 500.0
_LAMBDA_MAX = 200.0  # numeric guard; the Bessel layer is validated to |nu| = 200
_PHI_FLOOR = 1e-10
_RESP_FLOOR = 1e-300


class FitError(RuntimeError):
    """Base class for fitting failures; carries any partial trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class DegenerateFitError(FitError):
    """Empty or starved component, or unusable initialization."""


class NumericFitError(FitError):
    """Non-finite intermediate that survived the guarded updates."""


@dataclass
class FitConfig:
    family: str = "mcghd"
    G: int = 1
    max_iter: int = 500
    epsilon: float = 0.01
    init: str = "kmeans"  # kmeans | labels | random
    seed: int = 1
    n_restarts: int = 1
    scale_data: bool = False
    varpi_init: float | None = None  # honored for the coalesced family only

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.G < 1:
            raise ValueError("G must be >= 1")
        if self.max_iter < 2:
            raise ValueError("max_iter must be >= 2")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be > 0")
        if self.init not in ("kmeans", "labels", "random"):
            raise ValueError("init must be 'kmeans', 'labels', or 'random'")
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be >= 1")

    @property
    def lambda_floor(self):
        return 1.0 + 1e-4 if self.family == "mcmsghd" else None


@dataclass
class EStepCache:
    """Per-observation posteriors and latent GIG conditional moments."""

    zhat: np.ndarray  # (n, G)
    uhat: np.ndarray  # (n, G)
    a: np.ndarray     # (n, G)   E[W0 | x, GHD branch]
    b: np.ndarray     # (n, G)   E[1/W0 | ...]
    c: np.ndarray     # (n, G)   E[log W0 | ...]
    E1: np.ndarray    # (n, G, p)  per-coordinate E[W]
    E2: np.ndarray    # (n, G, p)  per-coordinate E[1/W]
    E3: np.ndarray    # (n, G, p)  per-coordinate E[log W]
    loglik: float


@dataclass
class SufficientStats:
    """Responsibility-weighted aggregates of the E-step moments."""

    n_g: np.ndarray    # (G,)
    A: np.ndarray      # (G,)
    B: np.ndarray      # (G,)
    C: np.ndarray      # (G,)
    Ebar1: np.ndarray  # (G, p)
    Ebar2: np.ndarray  # (G, p)
    Ebar3: np.ndarray  # (G, p)
    s1bar: np.ndarray  # (G, p)
    s2bar: np.ndarray  # (G, p)


@dataclass
class FitResult:
    model: MixtureModel
    loglik_trace: np.ndarray
    bic: float
    map_labels: np.ndarray
    converged: bool
    n_iter: int
    scaling: tuple | None = None
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# initialization


def kmeans_init(data, G, seed):
    """Hard responsibilities from the best of 10 k-means restarts
    (within-cluster sum of squares criterion); a restart whose
    assignment empties a cluster is retried with a fresh seed, and more
    than 20 failed attempts abort."""
    data = np.asarray(data, dtype=float)
    n = data.shape[0]
    if n <= G:
        raise DegenerateFitError("need more observations than components")
    with np.errstate(over="ignore"):
        if not np.isfinite(np.sum(data * data)):
            raise NumericFitError("data magnitudes overflow the k-means initializer")
    children = np.random.SeedSequence(seed).spawn(40)
    successes = []
    attempts = 0
    next_child = 0
    while len(successes) < 10 and attempts < 20:
        attempts += 1
        rng = np.random.default_rng(children[next_child])
        next_child += 1
        try:
            centroids, assign = kmeans2(data, G, minit="++", seed=rng, missing="raise")
        except ClusterError:
            continue
        wcss = float(np.sum((data - centroids[assign]) ** 2))
        successes.append((wcss, assign))
    if not successes:
        raise DegenerateFitError("k-means produced an empty cluster in 20 attempts")
    assign = min(successes, key=lambda t: t[0])[1]
    resp = np.zeros((n, G))
    resp[np.arange(n), assign] = 1.0
    return resp


def _random_init(data, G, seed):
    rng = np.random.default_rng(seed)
    n = data.shape[0]
    for _ in range(20):
        assign = rng.integers(0, G, size=n)
        if len(np.unique(assign)) == G:
            resp = np.zeros((n, G))
            resp[np.arange(n), assign] = 1.0
            return resp
    raise DegenerateFitError("random initialization left a component empty")


def _fix_column_signs(gamma):
    """Orient each eigenvector so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(gamma), axis=0)
    signs = np.sign(gamma[idx, np.arange(gamma.shape[1])])
    signs[signs == 0] = 1.0
    return gamma * signs, signs


def _initial_varpi(config):
    if config.family == "mghd":
        return 1.0
    if config.family in ("mmsghd", "mcmsghd"):
        return 0.0
    if config.varpi_init is not None:
        if not 0.0 <= config.varpi_init <= 1.0:
            raise ValueError("varpi_init must lie in [0, 1]")
        return float(config.varpi_init)
    return 0.5


def _initial_model(data, resp, config):
    n, p = data.shape
    G = resp.shape[1]
    lam0 = 1.5 if config.family == "mcmsghd" else -0.5
    comps = []
    n_g = resp.sum(axis=0)
    for g in range(G):
        wg = resp[:, g]
        if n_g[g] < p + 1:
            raise DegenerateFitError(f"component {g + 1} starved at initialization")
        mean = wg @ data / n_g[g]
        centered = data - mean
        cov = (centered * wg[:, None]).T @ centered / n_g[g]
        cov = 0.5 * (cov + cov.T)
        if not np.all(np.isfinite(cov)):
            raise NumericFitError(
                f"non-finite covariance initializing component {g + 1}"
            )
        evals, evecs = np.linalg.eigh(cov)
        evals = np.clip(evals, 1e-8 * max(1.0, float(evals.max())), None)
        gamma, _ = _fix_column_signs(evecs)
        comps.append(CGHDComponent(
            mu=gamma.T @ mean,
            gamma=gamma,
            phi=evals,
            beta=np.zeros(p),
            omega_vec=np.ones(p),
            lambda_vec=np.full(p, lam0),
            omega0=1.0,
            lambda0=-0.5,
            varpi=_initial_varpi(config),
        ))
    return MixtureModel(config.family, n_g / n, comps)


# ---------------------------------------------------------------------------
# E-step


def _bessel_args_finite(arg, g):
    flat = np.isfinite(arg)
    if not flat.all():
        i = int(np.flatnonzero(~flat.reshape(arg.shape[0], -1).all(axis=1))[0])
        raise NumericFitError(
            f"non-finite Bessel argument at observation {i + 1}, component {g + 1}"
        )


def _component_estep(data, comp, g=0):
    """Log-densities of both inner branches plus all GIG conditional
    moments for one component.  The Bessel triple that feeds the
    moments also supplies the density's Bessel factor, so each branch
    costs one seed pass plus the order-derivative."""
    n, p = data.shape
    dy = data @ comp.gamma - comp.mu
    out = {}

    if comp.varpi > 0.0:
        delta = np.sum(dy * dy / comp.phi, axis=1)
        skew_form = float(np.sum(comp.beta**2 / comp.phi))
        slin = dy @ (comp.beta / comp.phi)
        d0 = comp.omega0 + skew_form
        e0 = comp.omega0 + delta
        nu0 = comp.lambda0 - 0.5 * p
        arg = np.sqrt(d0 * e0)
        _bessel_args_finite(arg, g)
        lo, mid, hi = log_k_triple(nu0, arg)
        half_log = 0.5 * (np.log(e0) - np.log(d0))
        out["lgh"] = (
            nu0 * half_log + mid - 0.5 * p * _LOG_2PI
            - 0.5 * np.sum(np.log(comp.phi))
            - log_bessel_k(comp.lambda0, comp.omega0) + slin
        )
        out["a"] = np.exp(half_log + hi - mid)
        out["b"] = np.exp(-half_log + lo - mid)
        out["c"] = half_log + dlog_bessel_k_dnu(nu0, arg)
    else:
        out["lgh"] = None
        out["a"] = np.ones(n)
        out["b"] = np.ones(n)
        out["c"] = np.zeros(n)

    if comp.varpi < 1.0:
        dbar = comp.omega_vec + comp.beta**2 / comp.phi
        ebar = comp.omega_vec + dy * dy / comp.phi
        nu = comp.lambda_vec - 0.5
        arg = np.sqrt(dbar * ebar)
        _bessel_args_finite(arg, g)
        lo, mid, hi = log_k_triple(nu[None, :], arg)
        half_log = 0.5 * (np.log(ebar) - np.log(dbar))
        per_coord = (
            nu * half_log + mid - 0.5 * _LOG_2PI - 0.5 * np.log(comp.phi)
            - log_bessel_k(comp.lambda_vec, comp.omega_vec)
            + dy * (comp.beta / comp.phi)
        )
        out["lms"] = per_coord.sum(axis=1)
        out["E1"] = np.exp(half_log + hi - mid)
        out["E2"] = np.exp(-half_log + lo - mid)
        out["E3"] = half_log + dlog_bessel_k_dnu(nu[None, :], arg)
    else:
        out["lms"] = None
        out["E1"] = np.ones((n, p))
        out["E2"] = np.ones((n, p))
        out["E3"] = np.zeros((n, p))
    return out


def _e_step_impl(data, model, fixed_rows=None, fixed_labels=None):
    n, p = data.shape
    G = model.G
    lcg = np.empty((n, G))
    uhat = np.empty((n, G))
    a = np.empty((n, G))
    b = np.empty((n, G))
    c = np.empty((n, G))
    E1 = np.empty((n, G, p))
    E2 = np.empty((n, G, p))
    E3 = np.empty((n, G, p))

    for g, comp in enumerate(model.components):
        parts = _component_estep(data, comp, g)
        if comp.varpi >= 1.0:
            lcg[:, g] = parts["lgh"]
            uhat[:, g] = 1.0
        elif comp.varpi <= 0.0:
            lcg[:, g] = parts["lms"]
            uhat[:, g] = 0.0
        else:
            top = np.log(comp.varpi) + parts["lgh"]
            bot = np.log1p(-comp.varpi) + parts["lms"]
            lcg[:, g] = np.logaddexp(top, bot)
            uhat[:, g] = expit(top - bot)
        a[:, g] = parts["a"]
        b[:, g] = parts["b"]
        c[:, g] = parts["c"]
        E1[:, g, :] = parts["E1"]
        E2[:, g, :] = parts["E2"]
        E3[:, g, :] = parts["E3"]

        for name, arr in (("lcg", lcg), ("a", a), ("b", b), ("c", c)):
            vals = arr[:, g]
            if not np.all(np.isfinite(vals)):
                i = int(np.flatnonzero(~np.isfinite(vals))[0])
                raise NumericFitError(
                    f"non-finite {name} at observation {i + 1}, component {g + 1}"
                )
        if not np.all(np.isfinite(E1[:, g])) or not np.all(np.isfinite(E2[:, g])) \
                or not np.all(np.isfinite(E3[:, g])):
            bad = ~(np.isfinite(E1[:, g]) & np.isfinite(E2[:, g]) & np.isfinite(E3[:, g]))
            i = int(np.flatnonzero(bad.any(axis=1))[0])
            raise NumericFitError(
                f"non-finite coordinate moment at observation {i + 1}, component {g + 1}"
            )

    logw = np.log(model.pi) + lcg
    lse = logsumexp(logw, axis=1)
    zhat = np.exp(logw - lse[:, None])
    zhat = np.maximum(zhat, _RESP_FLOOR)
    zhat /= zhat.sum(axis=1, keepdims=True)

    if fixed_rows is None:
        loglik = float(lse.sum())
    else:
        free = np.ones(n, dtype=bool)
        free[fixed_rows] = False
        loglik = float(lse[free].sum() + logw[fixed_rows, fixed_labels - 1].sum())
        zhat[fixed_rows] = 0.0
        zhat[fixed_rows, fixed_labels - 1] = 1.0

    return EStepCache(zhat=zhat, uhat=uhat, a=a, b=b, c=c,
                      E1=E1, E2=E2, E3=E3, loglik=loglik)


def e_step(data, model) -> EStepCache:
    """Posterior responsibilities, inner-branch weights, and all latent
    GIG conditional moments for the current parameters."""
    data = np.asarray(data, dtype=float)
    return _e_step_impl(data, model)


def compute_sufficient_stats(cache: EStepCache) -> SufficientStats:
    """Responsibility-weighted means of the E-step moments."""
    z = cache.zhat
    n_g = z.sum(axis=0)
    inv = 1.0 / n_g
    u = cache.uhat
    s1 = u[:, :, None] * cache.a[:, :, None] + (1.0 - u[:, :, None]) * cache.E1
    s2 = u[:, :, None] * cache.b[:, :, None] + (1.0 - u[:, :, None]) * cache.E2
    return SufficientStats(
        n_g=n_g,
        A=(z * cache.a).sum(axis=0) * inv,
        B=(z * cache.b).sum(axis=0) * inv,
        C=(z * cache.c).sum(axis=0) * inv,
        Ebar1=np.einsum("ig,igj->gj", z, cache.E1) * inv[:, None],
        Ebar2=np.einsum("ig,igj->gj", z, cache.E2) * inv[:, None],
        Ebar3=np.einsum("ig,igj->gj", z, cache.E3) * inv[:, None],
        s1bar=np.einsum("ig,igj->gj", z, s1) * inv[:, None],
        s2bar=np.einsum("ig,igj->gj", z, s2) * inv[:, None],
    )


# ---------------------------------------------------------------------------
# M-steps


def m_step_mixing(cache: EStepCache):
    """Mixing proportions and inner mixing proportions."""
    n, G = cache.zhat.shape
    p = cache.E1.shape[2]
    n_g = cache.zhat.sum(axis=0)
    if np.any(n_g < p + 1):
        g = int(np.argmin(n_g))
        raise DegenerateFitError(f"component {g + 1} starved (n_g = {n_g[g]:.2f})")
    pi = n_g / n
    varpi = (cache.zhat * cache.uhat).sum(axis=0) / n_g
    return pi, np.clip(varpi, 0.0, 1.0)


def _blend(cache, g):
    u = cache.uhat[:, g][:, None]
    s1 = u * cache.a[:, g][:, None] + (1.0 - u) * cache.E1[:, g, :]
    s2 = u * cache.b[:, g][:, None] + (1.0 - u) * cache.E2[:, g, :]
    return s1, s2


def m_step_location_skewness(data, cache, model, diagnostics=None):
    """Joint closed-form update of the rotated location and skewness."""
    n, p = data.shape
    G = model.G
    mu = np.empty((G, p))
    beta = np.empty((G, p))
    for g, comp in enumerate(model.components):
        y = data @ comp.gamma
        zc = cache.zhat[:, g]
        n_g = zc.sum()
        s1, s2 = _blend(cache, g)
        s1bar = zc @ s1 / n_g
        s2bar = zc @ s2 / n_g
        t = s1bar[None, :] * s2 - 1.0
        denom = zc @ t
        num_mu = zc @ (y * t)
        num_beta = zc @ (y * (s2bar[None, :] - s2))
        degenerate = np.abs(denom) < 1e-10
        safe = np.where(degenerate, 1.0, denom)
        mu[g] = np.where(degenerate, zc @ y / n_g, num_mu / safe)
        beta[g] = np.where(degenerate, 0.0, num_beta / safe)
        if diagnostics is not None and degenerate.any():
            diagnostics["mu_beta_fallbacks"] = (
                diagnostics.get("mu_beta_fallbacks", 0) + int(degenerate.sum())
            )
    return mu, beta


def m_step_phi(data, cache, model, diagnostics=None):
    """Diagonal scale update, mixing both inner branches; floored."""
    n, p = data.shape
    G = model.G
    phi = np.empty((G, p))
    for g, comp in enumerate(model.components):
        y = data @ comp.gamma
        zc = cache.zhat[:, g]
        n_g = zc.sum()
        s1, s2 = _blend(cache, g)
        resid = y - comp.mu
        val = zc @ (s2 * resid**2 - 2.0 * resid * comp.beta + s1 * comp.beta**2) / n_g
        floored = val < _PHI_FLOOR
        if diagnostics is not None and floored.any():
            diagnostics["phi_floored"] = (
                diagnostics.get("phi_floored", 0) + int(floored.sum())
            )
        phi[g] = np.maximum(val, _PHI_FLOOR)
    return phi


def gamma_objective(data, zc, s2, phi, mu, beta, gamma):
    """The eigenvector-matrix objective: responsibility-weighted
    quadratic term minus the linear (location/skew) term of the
    expected complete-data Gaussian piece, to be minimized."""
    y = data @ gamma
    aw = s2 / phi[None, :]
    lin = (s2 * mu[None, :] + beta[None, :]) / phi[None, :]
    quad = 0.5 * float(zc @ np.sum(aw * y * y, axis=1))
    linear = float(zc @ np.sum(lin * y, axis=1))
    return quad - linear


def _mm_rotation(F):
    """Orthogonal maximizer of tr(F Gamma): R P' from the SVD F = P B R'."""
    try:
        P, _, Rt = np.linalg.svd(F)
    except np.linalg.LinAlgError as err:
        raise NumericFitError(f"SVD failure in the eigenvector update: {err}") from None
    return Rt.T @ P.T


def _mm_candidate(data, zc, aw, lin, gamma0, kind):
    """Linear majorizer coefficient matrix for the quadratic objective,
    tightened either through the diagonal weight bound (kind 1) or the
    rank-one data bound (kind 2)."""
    y0 = data @ gamma0
    if kind == 1:
        alpha1 = aw.max(axis=1)
        M = zc[:, None] * ((alpha1[:, None] - aw) * y0 + lin)
        F = M.T @ data
    else:
        alpha2 = zc * np.sum(data * data, axis=1)
        w = (alpha2[:, None] * aw).sum(axis=0)
        F = (w[:, None] * gamma0.T
             - (zc[:, None] * (aw * y0)).T @ data
             + (zc[:, None] * lin).T @ data)
    return _mm_rotation(F)


def m_step_gamma(data, cache, model, diagnostics=None):
    """Majorize-minimize update of each component's eigenvector matrix:
    one pass with each surrogate, keeping a candidate only when the
    objective does not increase."""
    n, p = data.shape
    gammas = []
    for g, comp in enumerate(model.components):
        if p == 1:
            gammas.append(np.eye(1))
            continue
        zc = cache.zhat[:, g]
        _, s2 = _blend(cache, g)
        aw = s2 / comp.phi[None, :]
        lin = (s2 * comp.mu[None, :] + comp.beta[None, :]) / comp.phi[None, :]
        work = comp.gamma
        f_cur = gamma_objective(data, zc, s2, comp.phi, comp.mu, comp.beta, work)
        for kind in (1, 2):
            cand = _mm_candidate(data, zc, aw, lin, work, kind)
            f_cand = gamma_objective(data, zc, s2, comp.phi, comp.mu, comp.beta, cand)
            if f_cand <= f_cur + 1e-12 * max(1.0, abs(f_cur)):
                work, f_cur = cand, f_cand
            elif diagnostics is not None:
                diagnostics["gamma_rejected"] = diagnostics.get("gamma_rejected", 0) + 1
        gammas.append(work)
    return gammas


def _q_gig(omega, lam, mean_sum, mean_log):
    """Per-unit objective for one GIG hyperparameter block:
    -log K_lam(omega) + (lam - 1) mean_log - omega/2 * mean_sum."""
    return -log_bessel_k(lam, omega) + (lam - 1.0) * mean_log - 0.5 * omega * mean_sum


def _update_gig_block(omega, lam, mean_sum, mean_log, lam_floor, diagnostics):
    """One guarded fixed-point step in the index and one guarded Newton
    step in the concentration; a step is kept only if the block
    objective does not decrease."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float)).copy()
    lam = np.atleast_1d(np.asarray(lam, dtype=float)).copy()
    mean_sum = np.broadcast_to(mean_sum, omega.shape)
    mean_log = np.broadcast_to(mean_log, omega.shape)
    tol = 1e-12

    q0 = _q_gig(omega, lam, mean_sum, mean_log)

    deriv = dlog_bessel_k_dnu(lam, omega)
    usable = np.abs(deriv) >= 1e-12
    if diagnostics is not None and not usable.all():
        diagnostics["lambda_skipped"] = (
            diagnostics.get("lambda_skipped", 0) + int((~usable).sum())
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        lam_prop = np.where(usable, mean_log * lam / np.where(usable, deriv, 1.0), lam)
    lam_prop = np.where(np.isfinite(lam_prop), lam_prop, lam)
    lam_prop = np.clip(lam_prop, -_LAMBDA_MAX, _LAMBDA_MAX)
    if lam_floor is not None:
        lam_prop = np.maximum(lam_prop, lam_floor)
    q1 = _q_gig(omega, lam_prop, mean_sum, mean_log)
    accept = q1 >= q0 - tol * (1.0 + np.abs(q0))
    lam_new = np.where(accept, lam_prop, lam)
    q_cur = np.where(accept, q1, q0)
    if diagnostics is not None and not accept.all():
        diagnostics["gig_steps_rejected"] = (
            diagnostics.get("gig_steps_rejected", 0) + int((~accept).sum())
        )

    ratio = np.exp(log_bessel_k_ratio(lam_new, omega))
    qp = ratio - lam_new / omega - 0.5 * mean_sum
    qpp = lam_new / omega**2 + ratio**2 - (2.0 * lam_new + 1.0) * ratio / omega - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        step = qp / qpp
    omega_prop = np.where(np.isfinite(step), omega - step, omega)
    clipped = (omega_prop < _OMEGA_MIN) | (omega_prop > _OMEGA_MAX)
    if diagnostics is not None and clipped.any():
        diagnostics["omega_clamped"] = (
            diagnostics.get("omega_clamped", 0) + int(clipped.sum())
        )
    omega_prop = np.clip(omega_prop, _OMEGA_MIN, _OMEGA_MAX)
    q2 = _q_gig(omega_prop, lam_new, mean_sum, mean_log)
    accept2 = q2 >= q_cur - tol * (1.0 + np.abs(q_cur))
    omega_new = np.where(accept2, omega_prop, omega)
    if diagnostics is not None and not accept2.all():
        diagnostics["gig_steps_rejected"] = (
            diagnostics.get("gig_steps_rejected", 0) + int((~accept2).sum())
        )
    return omega_new, lam_new


def m_step_gig_hyper(cache, stats, model, lam_floor=None, diagnostics=None):
    """Concentration and index updates for both inner branches.

    For the pure families the branch aggregates coincide with the
    responsibility-weighted statistics; for the coalesced family each
    branch is weighted by its own posterior share (zhat * uhat for the
    single-weight branch, zhat * (1 - uhat) for the multi-weight one),
    which is what the expected complete-data log-likelihood prescribes.
    A branch whose posterior share vanishes keeps its parameters.
    """
    G = model.G
    z = cache.zhat
    u = cache.uhat
    out = []
    for g, comp in enumerate(model.components):
        omega_vec = comp.omega_vec.copy()
        lambda_vec = comp.lambda_vec.copy()
        omega0, lambda0 = comp.omega0, comp.lambda0

        if model.family in ("mghd", "mcghd"):
            w0 = z[:, g] * u[:, g]
            total = w0.sum()
            if total > 1e-12:
                if model.family == "mghd":
                    mean_sum = stats.A[g] + stats.B[g]
                    mean_log = stats.C[g]
                else:
                    mean_sum = (w0 @ (cache.a[:, g] + cache.b[:, g])) / total
                    mean_log = (w0 @ cache.c[:, g]) / total
                o, l = _update_gig_block(
                    np.array([omega0]), np.array([lambda0]),
                    mean_sum, mean_log, None, diagnostics,
                )
                omega0, lambda0 = float(o[0]), float(l[0])

        if model.family != "mghd":
            w1 = z[:, g] * (1.0 - u[:, g])
            total = w1.sum()
            if total > 1e-12:
                if model.family == "mcghd":
                    mean_sum = (w1 @ (cache.E1[:, g, :] + cache.E2[:, g, :])) / total
                    mean_log = (w1 @ cache.E3[:, g, :]) / total
                else:
                    mean_sum = stats.Ebar1[g] + stats.Ebar2[g]
                    mean_log = stats.Ebar3[g]
                omega_vec, lambda_vec = _update_gig_block(
                    omega_vec, lambda_vec, mean_sum, mean_log, lam_floor, diagnostics,
                )

        out.append((omega_vec, lambda_vec, omega0, lambda0))
    return out


# ---------------------------------------------------------------------------
# stopping rule


def aitken_converged(loglik_trace, epsilon=0.01):
    """Aitken-accelerated stopping: extrapolate the log-likelihood
    limit and stop once the positive gap to it falls below epsilon."""
    if len(loglik_trace) < 3:
        raise ValueError("need at least three log-likelihood values")
    l0, l1, l2 = loglik_trace[-3], loglik_trace[-2], loglik_trace[-1]
    if abs(l1 - l0) <= 1e-12:
        return abs(l2 - l1) <= 1e-12
    a = (l2 - l1) / (l1 - l0)
    if a >= 1.0:
        return False
    linf = l1 + (l2 - l1) / (1.0 - a)
    gap = linf - l2
    return bool(0.0 <= gap < epsilon)


# ---------------------------------------------------------------------------
# fitting drivers


def _sweep(data, cache, model, config, diagnostics):
    """One full conditional M-step pass, mutating the model in place."""
    pi, varpi = m_step_mixing(cache)
    model.pi = pi
    if config.family == "mcghd":
        for g, comp in enumerate(model.components):
            comp.varpi = float(varpi[g])

    mu, beta = m_step_location_skewness(data, cache, model, diagnostics)
    for g, comp in enumerate(model.components):
        comp.mu = mu[g]
        comp.beta = beta[g]

    phi = m_step_phi(data, cache, model, diagnostics)
    for g, comp in enumerate(model.components):
        comp.phi = phi[g]

    gammas = m_step_gamma(data, cache, model, diagnostics)
    for g, comp in enumerate(model.components):
        fixed, signs = _fix_column_signs(gammas[g])
        comp.gamma = fixed
        # compensate the reflection so the density is unchanged
        comp.mu = comp.mu * signs
        comp.beta = comp.beta * signs

    stats = compute_sufficient_stats(cache)
    hyper = m_step_gig_hyper(cache, stats, model, config.lambda_floor, diagnostics)
    for g, comp in enumerate(model.components):
        comp.omega_vec, comp.lambda_vec, comp.omega0, comp.lambda0 = hyper[g]


def _run_em(data, model, config, fixed_rows=None, fixed_labels=None):
    diagnostics = {}
    trace = []
    converged = False
    cache = None
    for it in range(config.max_iter):
        try:
            cache = _e_step_impl(data, model, fixed_rows, fixed_labels)
        except NumericFitError as err:
            err.trace = trace
            raise
        trace.append(cache.loglik)
        if len(trace) >= 3 and aitken_converged(trace, config.epsilon):
            converged = True
            break
        if it < config.max_iter - 1:
            try:
                _sweep(data, cache, model, config, diagnostics)
            except FitError as err:
                err.trace = trace
                raise
    return model, np.asarray(trace), converged, cache, diagnostics


def _standardize(data):
    mean = data.mean(axis=0)
    sd = data.std(axis=0, ddof=0)
    sd = np.where(sd < 1e-12, 1.0, sd)
    return (data - mean) / sd, (mean, sd)


def _check_data(data):
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValueError("data must be an n x p matrix")
    if not np.all(np.isfinite(data)):
        raise ValueError("data must be finite")
    return data


def _finalize(model, trace, converged, cache, diagnostics, scaling, n):
    from ghmix.selection import count_free_params

    rho = count_free_params(model.family, model.G, model.p)
    bic = 2.0 * trace[-1] - rho * np.log(n)
    map_labels = np.argmax(cache.zhat, axis=1) + 1
    return FitResult(
        model=model,
        loglik_trace=trace,
        bic=float(bic),
        map_labels=map_labels,
        converged=converged,
        n_iter=len(trace),
        scaling=scaling,
        diagnostics=diagnostics,
    )


def fit(data, config: FitConfig, init_resp=None) -> FitResult:
    """Fit one mixture by the generalized EM algorithm.

    ``init_resp`` overrides the initialization with an explicit n x G
    responsibility matrix (otherwise k-means or random assignment per
    the config).  With ``n_restarts > 1`` the best final log-likelihood
    wins; restart r uses seed ``config.seed + r``.
    """
    data = _check_data(data)
    n, p = data.shape
    if n <= config.G * (p + 1):
        raise DegenerateFitError("need n > G * (p + 1) observations")
    scaling = None
    if config.scale_data:
        data, scaling = _standardize(data)

    best = None
    last_err = None
    for r in range(config.n_restarts):
        seed_r = config.seed + r
        try:
            if init_resp is not None:
                resp = np.asarray(init_resp, dtype=float)
                if resp.shape != (n, config.G):
                    raise ValueError("init_resp must have shape (n, G)")
            elif config.init == "labels":
                raise ValueError(
                    "init='labels' needs explicit init_resp or the "
                    "classification driver"
                )
            elif config.init == "kmeans":
                resp = kmeans_init(data, config.G, seed_r)
            else:
                resp = _random_init(data, config.G, seed_r)
            model = _initial_model(data, resp, config)
            model, trace, converged, cache, diagnostics = _run_em(data, model, config)
        except FitError as err:
            last_err = err
            continue
        if best is None or trace[-1] > best[1][-1]:
            best = (model, trace, converged, cache, diagnostics)
    if best is None:
        raise last_err
    return _finalize(*best, scaling, n)


def _check_labels(labels, G, n):
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ValueError("labels must be an n-vector")
    labels = labels.astype(np.int64)
    known = labels >= 1
    if labels.max(initial=0) > G:
        raise ValueError("labels must use components 1..G")
    if not known.any():
        raise ValueError("at least one labeled observation is required")
    present = np.unique(labels[known])
    missing = sorted(set(range(1, G + 1)) - set(present.tolist()))
    if missing:
        raise ValueError(f"no labeled observations for class(es) {missing}")
    return labels, known


def _resp_from_labels(data, labels, known, G):
    """Indicators for labelled rows; unlabelled rows join the class with
    the nearest labelled centroid."""
    n = data.shape[0]
    resp = np.zeros((n, G))
    centroids = np.stack([data[known & (labels == g + 1)].mean(axis=0)
                          for g in range(G)])
    resp[known, labels[known] - 1] = 1.0
    free = ~known
    if free.any():
        d2 = ((data[free][:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        resp[np.flatnonzero(free), np.argmin(d2, axis=1)] = 1.0
    return resp


def fit_classification(data, labels, config: FitConfig) -> FitResult:
    """Semi-supervised fit: responsibilities of labelled rows stay
    fixed to their indicators throughout the GEM iterations.

    Unknown labels are marked by values < 1; every class 1..G must
    appear among the labelled rows.
    """
    data = _check_data(data)
    n, p = data.shape
    labels, known = _check_labels(labels, config.G, n)
    scaling = None
    if config.scale_data:
        data, scaling = _standardize(data)

    resp = _resp_from_labels(data, labels, known, config.G)
    model = _initial_model(data, resp, config)
    fixed_rows = np.flatnonzero(known)
    fixed_labels = labels[known]
    model, trace, converged, cache, diagnostics = _run_em(
        data, model, config, fixed_rows, fixed_labels
    )
    return _finalize(model, trace, converged, cache, diagnostics, scaling, n)


def fit_discriminant(train_data, train_labels, test_data, config: FitConfig) -> np.ndarray:
    """Model-based discriminant analysis: estimate one joint mixture on
    fully labelled training data, then assign each test point to the
    component with the highest membership score (ties to the lowest
    index)."""
    train_data = _check_data(train_data)
    test_data = _check_data(test_data)
    labels = np.asarray(train_labels, dtype=np.int64)
    if np.any(labels < 1):
        raise ValueError("training labels must all be known (values 1..G)")
    result = fit_classification(train_data, labels, config)
    scores = _membership_scores(test_data, result)
    return np.argmax(scores, axis=1) + 1


def _membership_scores(data, result: FitResult):
    data = np.asarray(data, dtype=float)
    if result.scaling is not None:
        mean, sd = result.scaling
        data = (data - mean) / sd
    model = result.model
    return np.stack(
        [np.log(model.pi[g]) + cghd_log_density_batch(data, model.components[g])
         for g in range(model.G)], axis=1,
    )


def posterior_responsibilities(data, model: MixtureModel) -> np.ndarray:
    """Posterior component probabilities of each row under a fitted
    model (no latent moments)."""
    data = np.asarray(data, dtype=float)
    logw = np.stack(
        [np.log(model.pi[g]) + cghd_log_density_batch(data, model.components[g])
         for g in range(model.G)], axis=1,
    )
    z = np.exp(logw - logsumexp(logw, axis=1)[:, None])
    z = np.maximum(z, _RESP_FLOOR)
    return z / z.sum(axis=1, keepdims=True)
