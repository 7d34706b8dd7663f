"""Acceptance suite: one test per criterion, each printing a PASS line
with its measured quantities (run with ``pytest -v -s`` to see them).

Criterion 9 (real-data targets) is conditional: it runs only when the
environment variable GHMIX_REALDATA_DIR points at a directory holding
the public ``bankruptcy.csv`` / ``banknote.csv`` files (see README for
the expected format); otherwise it is skipped.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import dblquad, quad

from ghmix.bessel import log_bessel_k
from ghmix.densities import (
    CGHDComponent,
    cghd_log_density,
    ghd_log_density,
    ghd_log_density_batch,
    msghd_log_density,
)
from ghmix.gig import GIGParams, gig_expectations, gig_log_density, gig_sample
from ghmix.inference import FitConfig, fit, gamma_objective, m_step_gamma
from ghmix.labels import ari
from ghmix.simulate import ScenarioSpec, generate_scenario
from helpers import random_component, random_model

pytestmark = pytest.mark.acceptance


def report(criterion, detail):
    print(f"\nACCEPTANCE {criterion}: PASS ({detail})")


def test_criterion_01_gem_monotonicity_suite():
    """200+ fits across families, G, p: log-likelihood never decreases
    by more than 1e-8 per iteration; budget < 10 minutes."""
    start = time.time()
    families = ("mghd", "mmsghd", "mcmsghd", "mcghd")
    total_fits = 0
    worst = np.inf
    for p in (2, 5):
        for G in (1, 2, 3):
            for s in range(12):
                generator = "gaussian" if s % 2 == 0 else "ghd"
                data, _ = generate_scenario(
                    ScenarioSpec(generator=generator, p=p, G=G, seed=100 * p + 10 * G + s)
                )
                for shift in (0, 2):
                    family = families[(s + G + p + shift) % 4]
                    res = fit(data, FitConfig(family=family, G=G, max_iter=100,
                                              seed=s + 1))
                    total_fits += 1
                    if res.n_iter > 1:
                        worst = min(worst, float(np.min(np.diff(res.loglik_trace))))
                    assert np.all(np.diff(res.loglik_trace) >= -1e-8), (
                        family, G, p, s,
                    )
    # every family x G x p cell fitted with multiple seeds
    for family in families:
        for G in (1, 2, 3):
            for p in (2, 5):
                for s in range(3):
                    data, _ = generate_scenario(
                        ScenarioSpec(generator="gaussian", p=p, G=G,
                                     seed=7000 + 100 * p + 10 * G + s)
                    )
                    res = fit(data, FitConfig(family=family, G=G, max_iter=60,
                                              seed=s + 3))
                    total_fits += 1
                    assert np.all(np.diff(res.loglik_trace) >= -1e-8), (
                        family, G, p, s,
                    )
    elapsed = time.time() - start
    assert total_fits >= 200
    assert elapsed < 600.0
    report(1, f"{total_fits} fits, smallest step {worst:.2e}, {elapsed:.0f}s")


def _comp_1d(rng, varpi):
    return CGHDComponent(
        mu=[rng.uniform(-2, 2)], gamma=np.eye(1), phi=[rng.uniform(0.4, 2.5)],
        beta=[rng.uniform(-2, 2)],
        omega_vec=[rng.uniform(0.3, 5.0)], lambda_vec=[rng.uniform(-3, 3)],
        omega0=rng.uniform(0.3, 5.0), lambda0=rng.uniform(-3, 3), varpi=varpi,
    )


def test_criterion_02_density_normalization():
    """1-D densities integrate to 1 +- 1e-6 (50 parameter sets); 2-D
    multiple-scaled and coalesced densities to 1 +- 1e-4 (20 sets)."""
    start = time.time()
    rng = np.random.default_rng(202)
    worst_1d = 0.0
    for k in range(50):
        varpi = (1.0, 0.0, rng.uniform(0.2, 0.8))[k % 3]
        comp = _comp_1d(rng, varpi)
        fn = {1.0: ghd_log_density, 0.0: msghd_log_density}.get(varpi, cghd_log_density)
        total = sum(
            quad(lambda x: np.exp(fn(np.array([x]), comp)), a, b, limit=400)[0]
            for a, b in [(-np.inf, comp.mu[0]), (comp.mu[0], np.inf)]
        )
        worst_1d = max(worst_1d, abs(total - 1.0))
        assert total == pytest.approx(1.0, abs=1e-6)

    worst_2d = 0.0
    for k in range(20):
        varpi = 0.0 if k % 2 == 0 else rng.uniform(0.3, 0.7)
        comp = random_component(rng, 2, varpi=varpi)

        # multi-weight branch is separable in rotated coordinates
        ms_total = 1.0
        for j in range(2):
            cj = CGHDComponent(
                mu=[comp.mu[j]], gamma=np.eye(1), phi=[comp.phi[j]],
                beta=[comp.beta[j]], omega_vec=[comp.omega_vec[j]],
                lambda_vec=[comp.lambda_vec[j]], omega0=1.0, lambda0=-0.5,
                varpi=0.0,
            )
            val = sum(
                quad(lambda y: np.exp(msghd_log_density(np.array([y]), cj)), a, b,
                     limit=400)[0]
                for a, b in [(-np.inf, comp.mu[j]), (comp.mu[j], np.inf)]
            )
            ms_total *= val
        if varpi == 0.0:
            total = ms_total
        else:
            # single-weight branch: adaptive 2-D quadrature in rotated
            # coordinates (unit Jacobian) over a tail-safe box
            d0 = comp.omega0 + float(np.sum(comp.beta**2 / comp.phi))
            rate = np.sqrt(d0 / comp.phi) - np.abs(comp.beta) / comp.phi
            half = 60.0 / np.minimum(rate, 2.0)
            gh_total, _ = dblquad(
                lambda y1, y0: np.exp(ghd_log_density_batch(
                    (comp.gamma @ np.array([y0, y1]))[None, :], comp)[0]),
                comp.mu[0] - half[0], comp.mu[0] + half[0],
                lambda _: comp.mu[1] - half[1], lambda _: comp.mu[1] + half[1],
                epsabs=1e-6, epsrel=1e-7,
            )
            total = varpi * gh_total + (1.0 - varpi) * ms_total
        worst_2d = max(worst_2d, abs(total - 1.0))
        assert total == pytest.approx(1.0, abs=1e-4)
    report(2, f"worst 1-D dev {worst_1d:.2e}, worst 2-D dev {worst_2d:.2e}, "
              f"{time.time() - start:.0f}s")


def test_criterion_03_special_case_reductions():
    """Degenerate inner weights and the univariate case collapse the
    coalesced / multiple-scaled densities exactly (1e-12, 1000 draws)."""
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(1000):
        p = int(rng.integers(1, 5))
        x = rng.normal(size=p) * 3.0
        comp = random_component(rng, p, varpi=1.0, moderate=False)
        worst = max(worst, abs(cghd_log_density(x, comp) - ghd_log_density(x, comp)))
        comp.varpi = 0.0
        worst = max(worst, abs(cghd_log_density(x, comp) - msghd_log_density(x, comp)))
    assert worst <= 1e-12

    worst_1d = 0.0
    for _ in range(1000):
        comp = _comp_1d(rng, varpi=1.0)
        comp.omega_vec = np.array([comp.omega0])
        comp.lambda_vec = np.array([comp.lambda0])
        x = np.array([rng.uniform(-6, 6)])
        worst_1d = max(worst_1d, abs(msghd_log_density(x, comp) - ghd_log_density(x, comp)))
    assert worst_1d <= 1e-12
    report(3, f"coalesced dev {worst:.2e}, univariate dev {worst_1d:.2e}")


def test_criterion_04_gig_layer():
    """Closed-form GIG moments vs quadrature (1e-6 relative, 200 sets),
    sampler KS at the 1% level (20 sets), and symmetric-order anchors."""
    from scipy.stats import ksone

    start = time.time()
    rng = np.random.default_rng(404)

    worst_rel = 0.0
    for _ in range(200):
        params = GIGParams(
            omega=10 ** rng.uniform(-1.2, 1.2),
            eta=10 ** rng.uniform(-0.8, 0.8),
            lam=rng.uniform(-4.0, 4.0),
        )
        e_w, e_winv, e_logw = gig_expectations(params)

        def moment(fn):
            total = 0.0
            for a, b in [(0.0, params.eta), (params.eta, np.inf)]:
                v, _ = quad(lambda w: fn(w) * np.exp(gig_log_density(w, params)),
                            a, b, limit=500)
                total += v
            return total

        for closed, fn in [(e_w, lambda w: w), (e_winv, lambda w: 1.0 / w),
                           (e_logw, np.log)]:
            ref = moment(fn)
            rel = abs(closed - ref) / max(1e-12, abs(ref))
            worst_rel = max(worst_rel, rel)
            assert rel <= 1e-6, (params, closed, ref)

    n = 10_000
    crit = ksone.ppf(1.0 - 0.01 / 2.0, n)
    worst_ks = 0.0
    for k in range(20):
        params = GIGParams(
            omega=10 ** rng.uniform(-1.0, 1.0),
            eta=10 ** rng.uniform(-0.5, 0.5),
            lam=rng.uniform(-3.0, 3.0),
        )
        draws = np.sort(gig_sample(params, n, rng_seed=k + 1))
        qs = np.quantile(draws, np.linspace(0.005, 0.995, 50))
        cdf_prev, prev = 0.0, 0.0
        cdf = []
        for g in qs:
            v, _ = quad(lambda w: np.exp(gig_log_density(w, params)), prev, g,
                        limit=400)
            cdf_prev += v
            prev = g
            cdf.append(cdf_prev)
        emp = np.searchsorted(draws, qs, side="right") / n
        ks = float(np.max(np.abs(np.asarray(cdf) - emp)))
        worst_ks = max(worst_ks, ks)
        assert ks < crit

    for omega in (0.3, 1.0, 2.5, 10.0):
        e_w, e_winv, _ = gig_expectations(GIGParams(omega, 1.0, -0.5))
        assert abs(e_w - 1.0) <= 1e-10
        assert abs(e_winv - (1.0 + 1.0 / omega)) <= 1e-10
    report(4, f"worst moment rel {worst_rel:.2e}, worst KS {worst_ks:.4f} "
              f"(crit {crit:.4f}), {time.time() - start:.0f}s")


def test_criterion_05_bessel_layer():
    """Half-integer closed forms (1e-12), three-term recurrence (1e-8),
    and even-order symmetry (1e-12)."""
    xs = 10 ** np.linspace(-6, 4, 60)
    base = 0.5 * np.log(np.pi / (2.0 * xs)) - xs
    closed = {
        0.5: base,
        1.5: base + np.log1p(1.0 / xs),
        2.5: base + np.log(1.0 + 3.0 / xs + 3.0 / xs**2),
    }
    worst_half = 0.0
    for nu, expected in closed.items():
        got = log_bessel_k(nu, xs)
        dev = np.max(np.abs(got - expected) / np.maximum(1.0, np.abs(expected)))
        worst_half = max(worst_half, float(dev))
        assert dev <= 1e-12

    rng = np.random.default_rng(505)
    nu = rng.uniform(0.05, 60.0, size=1000)
    x = 10 ** rng.uniform(-1.0, 3.0, size=1000)
    rebuilt = np.logaddexp(log_bessel_k(nu - 1.0, x),
                           np.log(2.0 * nu / x) + log_bessel_k(nu, x))
    hi = log_bessel_k(nu + 1.0, x)
    worst_rec = float(np.max(np.abs(rebuilt - hi) / np.maximum(1.0, np.abs(hi))))
    assert worst_rec <= 1e-8

    nu = rng.uniform(0.0, 200.0, size=1000)
    x = 10 ** rng.uniform(-8.0, 4.0, size=1000)
    worst_sym = float(np.max(np.abs(log_bessel_k(nu, x) - log_bessel_k(-nu, x))))
    assert worst_sym <= 1e-12
    report(5, f"half-int {worst_half:.2e}, recurrence {worst_rec:.2e}, "
              f"symmetry {worst_sym:.2e}")


def test_criterion_06_simulation_study_reproduction():
    """Gaussian p=5 G=2 scenarios: median ARI 1.00 for all four
    families; heavy-tailed (single-weight generator) scenarios: median
    ARI >= 0.95; 10 replications each, budget < 15 minutes."""
    start = time.time()
    families = ("mcghd", "mghd", "mmsghd", "mcmsghd")
    medians = {}
    for generator, floor in (("gaussian", None), ("ghd", 0.95)):
        results = {f: [] for f in families}
        for rep in range(10):
            data, truth = generate_scenario(
                ScenarioSpec(generator=generator, p=5, G=2, seed=600 + rep)
            )
            for family in families:
                res = fit(data, FitConfig(family=family, G=2, max_iter=150, seed=1))
                results[family].append(ari(res.map_labels, truth))
        for family in families:
            med = float(np.median(results[family]))
            medians[(generator, family)] = med
            if floor is None:
                assert med == pytest.approx(1.0, abs=1e-12), (generator, family, results[family])
            else:
                assert med >= floor, (generator, family, results[family])
    elapsed = time.time() - start
    assert elapsed < 900.0
    detail = ", ".join(f"{g}/{f}={m:.2f}" for (g, f), m in medians.items())
    report(6, f"{detail}, {elapsed:.0f}s")


def test_criterion_07_gamma_update_descent():
    """On 50 random small instances the eigenvector MM step never
    increases its objective (slack 1e-8) and stays orthogonal (1e-10)."""
    from helpers import random_gamma_instance

    rng = np.random.default_rng(707)
    worst_rise = -np.inf
    worst_orth = 0.0
    for _ in range(50):
        data, cache, model, zc, s2, comp = random_gamma_instance(rng, n=20, p=3)
        before = gamma_objective(data, zc, s2, comp.phi, comp.mu, comp.beta, comp.gamma)
        out = m_step_gamma(data, cache, model)[0]
        after = gamma_objective(data, zc, s2, comp.phi, comp.mu, comp.beta, out)
        worst_rise = max(worst_rise, after - before)
        worst_orth = max(worst_orth, float(np.max(np.abs(out.T @ out - np.eye(3)))))
        assert after <= before + 1e-8
        assert worst_orth <= 1e-10
    report(7, f"worst objective rise {worst_rise:.2e}, worst orthogonality "
              f"deviation {worst_orth:.2e}")


def test_criterion_08_ari_correctness():
    """Pair-counting oracle over 100 random partition pairs (1e-12) and
    the fixed anti-correlated example."""
    assert ari([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(-0.5, abs=1e-15)
    rng = np.random.default_rng(808)
    worst = 0.0
    checked = 0
    while checked < 100:
        n = int(rng.integers(5, 40))
        a = rng.integers(1, int(rng.integers(2, 6)) + 1, size=n)
        b = rng.integers(1, int(rng.integers(2, 6)) + 1, size=n)
        same_a = same_b = both = total = 0
        for i in range(n):
            for j in range(i + 1, n):
                total += 1
                sa = a[i] == a[j]
                sb = b[i] == b[j]
                same_a += sa
                same_b += sb
                both += sa and sb
        expected = same_a * same_b / total
        maximum = 0.5 * (same_a + same_b)
        if maximum == expected:
            continue
        oracle = (both - expected) / (maximum - expected)
        dev = abs(ari(a, b) - oracle)
        worst = max(worst, dev)
        assert dev <= 1e-12
        checked += 1
    report(8, f"100 pairs, worst deviation {worst:.2e}")


@pytest.mark.skipif(
    "GHMIX_REALDATA_DIR" not in os.environ,
    reason="real-data CSVs not supplied (set GHMIX_REALDATA_DIR)",
)
@pytest.mark.parametrize("dataset,target,tol", [
    ("bankruptcy", 0.824, 0.10),
    ("banknote", 0.980, 0.02),
])
def test_criterion_09_real_data_targets(dataset, target, tol):
    """Conditional: best-BIC coalesced fit over a 10-seed sweep lands
    within the stated ARI window of the published value."""
    from ghmix.cli import read_dataset

    path = Path(os.environ["GHMIX_REALDATA_DIR"]) / f"{dataset}.csv"
    if not path.exists():
        pytest.skip(f"{path} not found")
    data, truth, _ = read_dataset(path, label_col="class")
    assert truth is not None and np.all(truth >= 1)
    best = None
    for seed in range(1, 11):
        cfg = FitConfig(family="mcghd", G=2, max_iter=500, seed=seed,
                        scale_data=True)
        try:
            res = fit(data, cfg)
        except Exception:
            continue
        if best is None or res.bic > best.bic:
            best = res
    assert best is not None
    got = ari(best.map_labels, truth)
    assert abs(got - target) <= tol
    report(9, f"{dataset}: ARI {got:.3f} vs {target} +- {tol}")


def test_criterion_10_classification_da_property_suite(tmp_path):
    """Both semi-supervised workflows recover all held-out labels on
    separated data across 20 seeds, driven through the CLI."""
    from ghmix.cli import main
    from test_cli import write_csv

    start = time.time()
    for seed in range(1, 21):
        rng = np.random.default_rng(1000 + seed)
        from helpers import blob_data

        data, truth = blob_data(rng, 60, np.array([[0.0, 0.0], [40.0, 40.0]]))
        hidden = rng.random(len(truth)) < 0.25
        if hidden.sum() == 0 or (~hidden).sum() == 0:
            continue
        labels = truth.copy()
        labels[hidden] = 0

        part = tmp_path / f"part_{seed}.csv"
        write_csv(part, data, labels)
        out = tmp_path / f"cls_{seed}"
        assert main([
            "classify", "--data", str(part), "--labels-col", "cls", "--G", "2",
            "--family", "mcghd", "--max-iter", "40", "--seed", "1",
            "--out-dir", str(out),
        ]) == 0
        rows = np.loadtxt(out / "predictions.csv", skiprows=1, delimiter=",",
                          dtype=int, ndmin=2)
        assert ari(rows[:, 1], truth[hidden]) == 1.0

        train = tmp_path / f"train_{seed}.csv"
        test = tmp_path / f"test_{seed}.csv"
        write_csv(train, data[~hidden], truth[~hidden])
        write_csv(test, data[hidden], truth[hidden])
        out = tmp_path / f"da_{seed}"
        assert main([
            "da", "--train", str(train), "--test", str(test),
            "--labels-col", "cls", "--G", "2", "--family", "mghd",
            "--max-iter", "40", "--seed", "1", "--out-dir", str(out),
        ]) == 0
        got = np.loadtxt(out / "test_labels.csv", skiprows=1, dtype=int)
        assert ari(got, truth[hidden]) == 1.0
    report(10, f"20 seeds, classification + discriminant, {time.time() - start:.0f}s")
