"""Shared factories for randomized test inputs."""

import numpy as np

from ghmix.densities import CGHDComponent, MixtureModel


def random_orthogonal(rng, p):
    q, r = np.linalg.qr(rng.normal(size=(p, p)))
    return q * np.sign(np.diag(r))


def random_component(rng, p, varpi=None, moderate=True):
    """A valid component with parameters in the well-conditioned range."""
    if moderate:
        omega_lo, omega_hi, lam_span, beta_span = 0.5, 3.0, 2.0, 1.5
    else:
        omega_lo, omega_hi, lam_span, beta_span = 0.05, 20.0, 6.0, 4.0
    if varpi is None:
        varpi = rng.uniform(0.0, 1.0)
    return CGHDComponent(
        mu=rng.uniform(-2.0, 2.0, size=p),
        gamma=random_orthogonal(rng, p) if p > 1 else np.eye(1),
        phi=rng.uniform(0.5, 2.0, size=p),
        beta=rng.uniform(-beta_span, beta_span, size=p),
        omega_vec=rng.uniform(omega_lo, omega_hi, size=p),
        lambda_vec=rng.uniform(-lam_span, lam_span, size=p),
        omega0=rng.uniform(omega_lo, omega_hi),
        lambda0=rng.uniform(-lam_span, lam_span),
        varpi=varpi,
    )


def random_model(rng, p, G, family="mcghd"):
    varpi = {"mghd": 1.0, "mmsghd": 0.0, "mcmsghd": 0.0}.get(family)
    comps = []
    for _ in range(G):
        comp = random_component(rng, p, varpi=varpi)
        if family == "mcmsghd":
            comp.lambda_vec = rng.uniform(1.2, 3.0, size=p)
        comps.append(comp)
    pi = rng.uniform(0.5, 1.5, size=G)
    pi /= pi.sum()
    return MixtureModel(family, pi, comps)


def random_gamma_instance(rng, n, p):
    """Data, cache, and model for exercising the eigenvector update."""
    from ghmix.inference import EStepCache

    data = rng.normal(size=(n, p)) * rng.uniform(0.5, 2.0)
    model = random_model(rng, p, 1)
    comp = model.components[0]
    zhat = rng.uniform(0.1, 1.0, size=(n, 1))
    uhat = rng.uniform(size=(n, 1))
    a = rng.uniform(1.0, 3.0, size=(n, 1))
    b = 1.0 / a + rng.uniform(0.0, 1.0, size=(n, 1))
    E1 = rng.uniform(1.0, 3.0, size=(n, 1, p))
    E2 = 1.0 / E1 + rng.uniform(0.0, 1.0, size=(n, 1, p))
    cache = EStepCache(
        zhat=zhat, uhat=uhat, a=a, b=b, c=np.zeros((n, 1)),
        E1=E1, E2=E2, E3=np.zeros((n, 1, p)), loglik=0.0,
    )
    u = uhat[:, 0][:, None]
    s2 = u * b[:, 0][:, None] + (1.0 - u) * E2[:, 0, :]
    return data, cache, model, zhat[:, 0], s2, comp


def blob_data(rng, n_per, centers, scale=1.0):
    """Gaussian blobs around the given centers; returns (data, labels)."""
    centers = np.asarray(centers, dtype=float)
    G, p = centers.shape
    parts, labels = [], []
    for g in range(G):
        parts.append(centers[g] + scale * rng.normal(size=(n_per, p)))
        labels.append(np.full(n_per, g + 1))
    return np.vstack(parts), np.concatenate(labels)
