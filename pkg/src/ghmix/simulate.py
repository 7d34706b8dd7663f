"""Random generation from the hyperbolic family and the synthetic
clustering scenarios used by the simulation experiments.

Scenario layout: each of G components contributes ``n_per_component``
p-vectors; component centres are uniform in a hypercube, the scale
matrix is correlation-like (unit diagonal, random nonnegative
off-diagonals, projected to the SPD cone when needed), and the
per-coordinate skewness is uniform on a symmetric interval.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ghmix.densities import CGHDComponent
from ghmix.gig import GIGParams, gig_sample

__all__ = [
    "ScenarioSpec",
    "sample_ghd",
    "sample_msghd",
    "sample_cghd",
    "generate_scenario",
    "component_from_moments",
]

GENERATORS = ("gaussian", "skew_normal", "ghd", "msghd")


@dataclass
class ScenarioSpec:
    generator: str = "gaussian"
    p: int = 5
    G: int = 2
    n_per_component: int = 200
    hypercube_side: float = 50.0
    corr_range: tuple = (0.0, 0.6)
    skew_range: tuple = (-6.0, 6.0)
    omega_fixed: float = 1.0
    lambda_fixed: float = -0.5
    seed: int = 1

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ValueError(f"generator must be one of {GENERATORS}")
        if self.p < 1 or self.G < 1 or self.n_per_component < 1:
            raise ValueError("counts must be positive")
        if not (self.corr_range[0] <= self.corr_range[1]
                and self.skew_range[0] <= self.skew_range[1]):
            raise ValueError("ranges must be well ordered")


def _rng_from(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_ghd(comp: CGHDComponent, n: int, seed) -> np.ndarray:
    """Draws via the single-weight stochastic representation
    ``X = Gamma mu + W Gamma beta + sqrt(W) V`` with
    ``W ~ GIG(omega0, 1, lambda0)`` and ``V ~ N(0, Gamma Phi Gamma')``."""
    rng = _rng_from(seed)
    w = gig_sample(GIGParams(comp.omega0, 1.0, comp.lambda0), n, rng)
    z = rng.normal(size=(n, comp.p)) * np.sqrt(comp.phi)
    v = z @ comp.gamma.T
    loc = comp.gamma @ comp.mu
    skew = comp.gamma @ comp.beta
    return loc + w[:, None] * skew + np.sqrt(w)[:, None] * v


def sample_msghd(comp: CGHDComponent, n: int, seed) -> np.ndarray:
    """Draws via the multi-weight representation: independent
    ``W_j ~ GIG(omega_j, 1, lambda_j)`` per rotated coordinate, then
    ``X = Gamma (mu + W beta + sqrt(W Phi) Z)``."""
    rng = _rng_from(seed)
    w = np.column_stack([
        gig_sample(GIGParams(comp.omega_vec[j], 1.0, comp.lambda_vec[j]), n, rng)
        for j in range(comp.p)
    ])
    z = rng.normal(size=(n, comp.p))
    y = comp.mu + w * comp.beta + np.sqrt(w * comp.phi) * z
    return y @ comp.gamma.T


def sample_cghd(comp: CGHDComponent, n: int, seed) -> np.ndarray:
    """Draws from the coalesced law: a Bernoulli(varpi) switch between
    the single-weight and multi-weight representations per draw."""
    if comp.varpi >= 1.0:
        return sample_ghd(comp, n, seed)
    if comp.varpi <= 0.0:
        return sample_msghd(comp, n, seed)
    rng = _rng_from(seed)
    use_ghd = rng.random(n) < comp.varpi
    seeds = rng.spawn(2)
    out = np.empty((n, comp.p))
    n_ghd = int(use_ghd.sum())
    if n_ghd:
        out[use_ghd] = sample_ghd(comp, n_ghd, seeds[0])
    if n_ghd < n:
        out[~use_ghd] = sample_msghd(comp, n - n_ghd, seeds[1])
    return out


def _random_correlation_spd(rng, p, lo, hi):
    """Symmetric matrix with unit diagonal and off-diagonals in
    [lo, hi], nudged onto the SPD cone if the draw fails to be one."""
    if p == 1:
        return np.eye(1)
    mat = np.eye(p)
    upper = np.triu_indices(p, k=1)
    vals = rng.uniform(lo, hi, size=len(upper[0]))
    mat[upper] = vals
    mat[(upper[1], upper[0])] = vals
    evals = np.linalg.eigvalsh(mat)
    if evals.min() < 1e-6:
        evals, evecs = np.linalg.eigh(mat)
        mat = evecs @ np.diag(np.clip(evals, 1e-6, None)) @ evecs.T
        d = np.sqrt(np.diag(mat))
        mat = mat / np.outer(d, d)
    return mat


def component_from_moments(center, sigma, skew, omega, lam) -> CGHDComponent:
    """Build a shared-parameter component from ambient moments: the
    scale is eigen-decomposed, the centre moves to rotated coordinates,
    and the skewness vector is taken as already rotated."""
    center = np.asarray(center, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    skew = np.asarray(skew, dtype=float)
    p = center.shape[0]
    evals, evecs = np.linalg.eigh(sigma)
    signs = np.sign(evecs[np.argmax(np.abs(evecs), axis=0), np.arange(p)])
    signs[signs == 0] = 1.0
    gamma = evecs * signs
    return CGHDComponent(
        mu=gamma.T @ center,
        gamma=gamma,
        phi=np.clip(evals, 1e-10, None),
        beta=skew,
        omega_vec=np.full(p, omega),
        lambda_vec=np.full(p, lam),
        omega0=omega,
        lambda0=lam,
        varpi=1.0,
    )


def generate_scenario(spec: ScenarioSpec):
    """Synthetic data set: returns ``(data, labels)`` with 1-based
    component labels, deterministic in the spec's seed."""
    rng = np.random.default_rng(spec.seed)
    n_per = spec.n_per_component
    blocks = []
    labels = []
    for g in range(spec.G):
        center = rng.uniform(0.0, spec.hypercube_side, size=spec.p)
        sigma = _random_correlation_spd(rng, spec.p, *spec.corr_range)
        skew = rng.uniform(*spec.skew_range, size=spec.p)
        comp = component_from_moments(center, sigma, skew,
                                      spec.omega_fixed, spec.lambda_fixed)
        child = rng.spawn(1)[0]
        if spec.generator == "gaussian":
            chol = np.linalg.cholesky(sigma)
            block = center + child.normal(size=(n_per, spec.p)) @ chol.T
        elif spec.generator == "skew_normal":
            # hidden truncation: location + skew * |Z0| + correlated noise
            chol = np.linalg.cholesky(sigma)
            half = np.abs(child.normal(size=(n_per, 1)))
            block = center + half * skew + child.normal(size=(n_per, spec.p)) @ chol.T
        elif spec.generator == "ghd":
            block = sample_ghd(comp, n_per, child)
        else:
            block = sample_msghd(comp, n_per, child)
        blocks.append(block)
        labels.append(np.full(n_per, g + 1, dtype=np.int64))
    return np.vstack(blocks), np.concatenate(labels)
