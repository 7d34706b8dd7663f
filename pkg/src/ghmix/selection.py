"""Free-parameter accounting, BIC, and the model-search sweep."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ghmix.densities import FAMILIES
from ghmix.inference import FitConfig, FitError, FitResult, fit

__all__ = ["ModelScore", "count_free_params", "bic", "select"]

# tie-break order across families (after smaller G)
_FAMILY_ORDER = {name: i for i, name in enumerate(FAMILIES)}


@dataclass
class ModelScore:
    family: str
    G: int
    loglik: float
    rho: int
    bic: float
    status: str = "ok"  # ok | failed
    message: str = ""
    result: FitResult | None = field(default=None, repr=False)


def count_free_params(family: str, G: int, p: int) -> int:
    """Number of free parameters.

    Location and skewness contribute 2p per component.  The
    single-weight family carries an unstructured symmetric scale
    (p(p+1)/2) plus its two GIG hyperparameters; the multiple-scaled
    families carry p(p-1)/2 eigenvector angles, p eigenvalues, and 2p
    per-coordinate hyperparameters; the coalesced family adds the
    single-weight pair and the inner mixing weight on top.  Mixing
    proportions add G - 1.
    """
    if family not in FAMILIES:
        raise ValueError(f"family must be one of {FAMILIES}")
    if G < 1 or p < 1:
        raise ValueError("G and p must be >= 1")
    if family == "mghd":
        per = 2 * p + p * (p + 1) // 2 + 2
    elif family in ("mmsghd", "mcmsghd"):
        per = 2 * p + p * (p - 1) // 2 + p + 2 * p
    else:  # mcghd
        per = 2 * p + p * (p - 1) // 2 + p + 2 * p + 3
    return G * per + (G - 1)


def bic(fit_result: FitResult, n: int) -> float:
    """2 * loglik - rho * log(n); larger is better."""
    rho = count_free_params(fit_result.model.family, fit_result.model.G,
                            fit_result.model.p)
    return float(2.0 * fit_result.loglik_trace[-1] - rho * np.log(n))


def select(data, G_range, families, config: FitConfig):
    """Fit every (G, family) pair and return ``(best, scores)``.

    ``best`` maximizes BIC; exact ties go to the smaller G and then the
    family order mghd < mmsghd < mcmsghd < mcghd.  Pairs whose fit
    degenerates are kept in the score table with a failure flag and
    excluded from the arg max.
    """
    data = np.asarray(data, dtype=float)
    G_list = sorted(set(int(g) for g in G_range))
    family_list = [f for f in FAMILIES if f in set(families)]
    if not G_list or not family_list:
        raise ValueError("G_range and families must be nonempty")
    unknown = set(families) - set(FAMILIES)
    if unknown:
        raise ValueError(f"unknown families: {sorted(unknown)}")

    n, p = data.shape
    scores = []
    for family in family_list:
        for G in G_list:
            from dataclasses import replace

            cfg = replace(config, family=family, G=G)
            rho = count_free_params(family, G, p)
            try:
                result = fit(data, cfg)
            except (FitError, ValueError) as err:
                scores.append(ModelScore(
                    family=family, G=G, loglik=np.nan, rho=rho, bic=np.nan,
                    status="failed", message=str(err),
                ))
                continue
            scores.append(ModelScore(
                family=family, G=G, loglik=float(result.loglik_trace[-1]),
                rho=rho, bic=result.bic, result=result,
            ))

    usable = [s for s in scores if s.status == "ok"]
    if not usable:
        raise FitError("every (G, family) fit failed")
    best = max(usable, key=lambda s: (s.bic, -s.G, -_FAMILY_ORDER[s.family]))
    return best, scores
