"""
Log-scale evaluation of the modified Bessel function of the third kind.

Every density and conditional expectation in this package reduces to
:math:`K_\\nu(x)` for real order :math:`\\nu` and positive argument
:math:`x`.  The arguments produced by the EM iterations routinely push
:math:`K_\\nu(x)` far outside double range (tiny ``x`` with large
``|nu|``, or ``x`` in the thousands), so all public functions return
natural logarithms and all internal work is done in log scale.

Evaluation strategy
-------------------
The order is reduced by symmetry (:math:`K_\\nu = K_{-\\nu}`) and split
as ``nu = n + mu`` with ``|mu| <= 1/2``.  Seed values
:math:`\\log K_\\mu(x)` and :math:`\\log K_{\\mu+1}(x)` come from

* Temme's power series for ``x <= 2``,
* a Steed-style continued fraction for ``x > 2`` (computed on the
  :math:`e^{x}`-scaled function, so no underflow),

and the order is then raised with the three-term recurrence
:math:`K_{\\nu+1} = K_{\\nu-1} + (2\\nu/x)K_\\nu`, evaluated with
``logaddexp``.  The recurrence is upward-stable for ``K`` and all its
terms are positive, so the log-space form neither overflows nor loses
sign information.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, rgamma

_EPS = np.finfo(float).eps
_EULER = 0.5772156649015328606
# zeta(3)/3 - euler*pi**2/12 + euler**3/6: the mu**2 coefficient of the
# odd part of 1/Gamma(1-mu) around mu=0, needed when the direct
# difference of reciprocal gammas would cancel.
_GAM1_CURV = (
    1.2020569031595942854 / 3.0
    - _EULER * np.pi**2 / 12.0
    + _EULER**3 / 6.0
)

__all__ = ["log_bessel_k", "log_bessel_k_ratio", "dlog_bessel_k_dnu", "log_k_triple"]


def _reciprocal_gamma_terms(mu):
    """Return (gam1, gam2, gampl, gammi) for |mu| <= 1/2.

    gampl = 1/Gamma(1+mu), gammi = 1/Gamma(1-mu),
    gam1 = (gammi - gampl)/(2 mu)  (limit -euler at mu=0),
    gam2 = (gammi + gampl)/2.
    """
    gampl = rgamma(1.0 + mu)
    gammi = rgamma(1.0 - mu)
    gam2 = 0.5 * (gammi + gampl)
    small = np.abs(mu) < 1e-3
    mu_safe = np.where(small, 1.0, mu)
    gam1 = np.where(
        small,
        -_EULER - _GAM1_CURV * mu * mu,
        (gammi - gampl) / (2.0 * mu_safe),
    )
    return gam1, gam2, gampl, gammi


def _seed_small_x(mu, x, max_terms=1000):
    """Temme series seeds (log K_mu, log K_{mu+1}) for x <= 2, |mu| <= 1/2."""
    x2 = 0.5 * x
    d = -np.log(x2)
    e = mu * d
    # pi*mu/sin(pi*mu) and sinh(e)/e with their removable singularities
    fact = 1.0 / np.sinc(mu)
    e_small = np.abs(e) < 1e-8
    e_safe = np.where(e_small, 1.0, e)
    fact2 = np.where(e_small, 1.0 + e * e / 6.0, np.sinh(e_safe) / e_safe)
    gam1, gam2, gampl, gammi = _reciprocal_gamma_terms(mu)

    ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
    total = ff.copy()
    ee = np.exp(e)
    p = 0.5 * ee / gampl
    q = 0.5 / (ee * gammi)
    c = np.ones_like(x)
    x2sq = x2 * x2
    total1 = p.copy()
    mu2 = mu * mu

    for i in range(1, max_terms + 1):
        ff = (i * ff + p + q) / (i * i - mu2)
        c *= x2sq / i
        p /= i - mu
        q /= i + mu
        delta = c * ff
        total += delta
        total1 += c * (p - i * ff)
        if np.all(np.abs(delta) < np.abs(total) * _EPS):
            break

    return np.log(total), np.log(total1) + np.log(2.0 / x)


def _seed_large_x(mu, x, max_terms=10000):
    """Continued-fraction seeds (log K_mu, log K_{mu+1}) for x > 2, |mu| <= 1/2."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25 - mu * mu
    q = np.broadcast_to(a1, x.shape).copy()
    c = q.copy()
    a = -q
    s = 1.0 + q * delh

    for i in range(2, max_terms + 1):
        a -= 2.0 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if np.all(np.abs(dels) < np.abs(s) * _EPS):
            break

    h = a1 * h
    log_kmu = 0.5 * np.log(np.pi / (2.0 * x)) - x - np.log(s)
    log_kmu1 = log_kmu + np.log((mu + x + 0.5 - h) / x)
    return log_kmu, log_kmu1


def _seed_tiny_x(mu, x):
    """Leading-order seeds for x below any argument of interest (< 1e-12)."""
    log_half = np.log(0.5)
    log_2_over_x = np.log(2.0) - np.log(x)
    abs_mu = np.abs(mu)
    # K_m(x) ~ Gamma(|m|)/2 * (2/x)^|m| for m != 0, K_0(x) ~ -log(x/2) - euler
    near_zero = abs_mu < 1e-12
    safe_mu = np.where(near_zero, 0.5, abs_mu)
    log_kmu = np.where(
        near_zero,
        np.log(log_2_over_x - _EULER),
        gammaln(safe_mu) + log_half + safe_mu * log_2_over_x,
    )
    log_kmu1 = gammaln(mu + 1.0) + log_half + (mu + 1.0) * log_2_over_x
    return log_kmu, log_kmu1


def _log_k_pair_numpy(nu, x):
    """(log K_nu(x), log K_{nu+1}(x)) for flat arrays, nu >= 0, x > 0."""
    nsteps = np.rint(nu).astype(np.int64)
    mu = nu - nsteps

    log_k0 = np.empty_like(x)
    log_k1 = np.empty_like(x)
    tiny = x < 1e-12
    small = (~tiny) & (x <= 2.0)
    large = x > 2.0
    # Each regime is solved on its own compressed subset so the series /
    # continued-fraction loops run mask-free and stop on their own worst case.
    for mask, seed in ((tiny, _seed_tiny_x), (small, _seed_small_x), (large, _seed_large_x)):
        if mask.any():
            k0, k1 = seed(mu[mask], x[mask])
            log_k0[mask] = k0
            log_k1[mask] = k1

    max_steps = int(nsteps.max(initial=0))
    if max_steps > 0:
        if np.all(nsteps == max_steps):
            # uniform order (the common case: scalar nu broadcast over x)
            log_x = np.log(x)
            for k in range(1, max_steps + 1):
                log_k0, log_k1 = log_k1, np.logaddexp(
                    log_k0, np.log(2.0 * (mu + k)) - log_x + log_k1
                )
        else:
            log_x = np.log(x)
            for k in range(1, max_steps + 1):
                step = k <= nsteps
                if not step.any():
                    break
                nxt = np.logaddexp(log_k0, np.log(2.0 * (mu + k)) - log_x + log_k1)
                log_k0 = np.where(step, log_k1, log_k0)
                log_k1 = np.where(step, nxt, log_k1)
    return log_k0, log_k1


try:  # compiled elementwise path; the numpy path above is the fallback
    from numba import njit as _njit

    @_njit(cache=True)
    def _pair_kernel(nu, x, out0, out1):  # pragma: no cover - exercised via dispatch
        eps = 2.220446049250313e-16
        euler = 0.5772156649015328606
        gam1_curv = 1.2020569031595942854 / 3.0 - euler * math.pi**2 / 12.0 + euler**3 / 6.0
        for i in range(nu.shape[0]):
            v = nu[i]
            xx = x[i]
            n = int(round(v))
            mu = v - n

            if xx < 1e-12:
                # leading-order seeds far below any argument of interest
                l2x = math.log(2.0) - math.log(xx)
                if abs(mu) < 1e-12:
                    k0 = math.log(l2x - euler)
                else:
                    k0 = math.lgamma(abs(mu)) + math.log(0.5) + abs(mu) * l2x
                k1 = math.lgamma(mu + 1.0) + math.log(0.5) + (mu + 1.0) * l2x
            elif xx <= 2.0:
                # Temme series
                x2 = 0.5 * xx
                d = -math.log(x2)
                e = mu * d
                pimu = math.pi * mu
                fact = 1.0 if abs(pimu) < 1e-15 else pimu / math.sin(pimu)
                fact2 = 1.0 + e * e / 6.0 if abs(e) < 1e-8 else math.sinh(e) / e
                gampl = 1.0 / math.gamma(1.0 + mu)
                gammi = 1.0 / math.gamma(1.0 - mu)
                gam2 = 0.5 * (gammi + gampl)
                if abs(mu) < 1e-3:
                    gam1 = -euler - gam1_curv * mu * mu
                else:
                    gam1 = (gammi - gampl) / (2.0 * mu)
                ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
                total = ff
                ee = math.exp(e)
                p = 0.5 * ee / gampl
                q = 0.5 / (ee * gammi)
                c = 1.0
                x2sq = x2 * x2
                total1 = p
                mu2 = mu * mu
                for it in range(1, 1001):
                    ff = (it * ff + p + q) / (it * it - mu2)
                    c *= x2sq / it
                    p /= it - mu
                    q /= it + mu
                    delta = c * ff
                    total += delta
                    total1 += c * (p - it * ff)
                    if abs(delta) < abs(total) * eps:
                        break
                k0 = math.log(total)
                k1 = math.log(total1) + math.log(2.0 / xx)
            else:
                # Steed-style continued fraction on the e^x-scaled function
                b = 2.0 * (1.0 + xx)
                dd = 1.0 / b
                h = dd
                delh = dd
                q1 = 0.0
                q2 = 1.0
                a1 = 0.25 - mu * mu
                q = a1
                cc = a1
                a = -a1
                s = 1.0 + q * delh
                for it in range(2, 10001):
                    a -= 2.0 * (it - 1)
                    cc = -a * cc / it
                    qnew = (q1 - b * q2) / a
                    q1 = q2
                    q2 = qnew
                    q += cc * qnew
                    b += 2.0
                    dd = 1.0 / (b + a * dd)
                    delh = (b * dd - 1.0) * delh
                    h += delh
                    dels = q * delh
                    s += dels
                    if abs(dels) < abs(s) * eps:
                        break
                h = a1 * h
                k0 = 0.5 * math.log(math.pi / (2.0 * xx)) - xx - math.log(s)
                k1 = k0 + math.log((mu + xx + 0.5 - h) / xx)

            log_x = math.log(xx)
            for k in range(1, n + 1):
                t = math.log(2.0 * (mu + k)) - log_x + k1
                if k0 > t:
                    nxt = k0 + math.log1p(math.exp(t - k0))
                else:
                    nxt = t + math.log1p(math.exp(k0 - t))
                k0 = k1
                k1 = nxt
            out0[i] = k0
            out1[i] = k1

    def _log_k_pair(nu, x):
        out0 = np.empty_like(x)
        out1 = np.empty_like(x)
        _pair_kernel(np.ascontiguousarray(nu), np.ascontiguousarray(x), out0, out1)
        return out0, out1

except ImportError:  # pragma: no cover
    _log_k_pair = _log_k_pair_numpy


def _validate(nu, x):
    nu = np.asarray(nu, dtype=float)
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(nu)):
        raise ValueError("Bessel order must be finite")
    if not np.all(np.isfinite(x)) or np.any(x <= 0.0):
        raise ValueError("Bessel argument must be finite and > 0")
    return nu, x


def log_bessel_k(nu, x):
    """log K_nu(x) for real order and positive argument.

    Parameters
    ----------
    nu : float or ndarray
        Order; broadcast against ``x``.
    x : float or ndarray
        Argument, strictly positive.

    Returns
    -------
    float or ndarray
        ``log K_nu(x)``, finite wherever the inputs are valid.
    """
    nu, x = _validate(nu, x)
    scalar = nu.ndim == 0 and x.ndim == 0
    nu_b, x_b = np.broadcast_arrays(nu, x)
    out, _ = _log_k_pair(np.abs(nu_b).ravel(), np.ascontiguousarray(x_b, dtype=float).ravel())
    out = out.reshape(nu_b.shape)
    return float(out) if scalar else out


def log_bessel_k_ratio(nu, x):
    """log of K_{nu+1}(x)/K_nu(x), evaluated without forming either value.

    The ratio is >= 1 whenever ``nu >= -1/2``, so the result is
    nonnegative there.
    """
    nu, x = _validate(nu, x)
    scalar = nu.ndim == 0 and x.ndim == 0
    nu_b, x_b = np.broadcast_arrays(nu, x)
    nu_f = nu_b.ravel().astype(float)
    x_f = np.ascontiguousarray(x_b, dtype=float).ravel()
    out = np.empty_like(x_f)

    pos = nu_f >= 0.0
    if pos.any():
        k0, k1 = _log_k_pair(nu_f[pos], x_f[pos])
        out[pos] = k1 - k0
    neg = nu_f <= -1.0
    if neg.any():
        # K_{nu+1}/K_nu = K_m/K_{m+1} with m = -nu - 1 >= 0
        k0, k1 = _log_k_pair(-nu_f[neg] - 1.0, x_f[neg])
        out[neg] = k0 - k1
    mid = ~(pos | neg)  # -1 < nu < 0: both orders reduce to [0, 1)
    if mid.any():
        hi, _ = _log_k_pair(nu_f[mid] + 1.0, x_f[mid])
        lo, _ = _log_k_pair(-nu_f[mid], x_f[mid])
        out[mid] = hi - lo

    out = out.reshape(nu_b.shape)
    return float(out) if scalar else out


def log_k_triple(nu, x):
    """(log K_{nu-1}, log K_nu, log K_{nu+1}) at x, sharing one seed pass.

    This is the access pattern of every GIG conditional-moment
    computation, where the argument is a long vector and the order a
    scalar.
    """
    nu, x = _validate(nu, x)
    nu_b, x_b = np.broadcast_arrays(nu, x)
    shape = nu_b.shape
    nu_f = np.abs(nu_b).ravel()
    x_f = np.ascontiguousarray(x_b, dtype=float).ravel()
    lo = np.empty_like(x_f)
    mid = np.empty_like(x_f)
    hi = np.empty_like(x_f)

    # K is even in the order: the triple at nu and at -nu coincide after
    # swapping the outer entries; with m = |nu| the orders are (m-1, m, m+1).
    big = nu_f >= 1.0
    if big.any():
        k0, k1 = _log_k_pair(nu_f[big] - 1.0, x_f[big])
        order = nu_f[big]
        k2 = np.logaddexp(k0, np.log(2.0 * order) - np.log(x_f[big]) + k1)
        lo[big], mid[big], hi[big] = k0, k1, k2
    frac = ~big  # 0 <= m < 1: |m-1| = 1-m needs its own fractional seed
    if frac.any():
        k1, k2 = _log_k_pair(nu_f[frac], x_f[frac])
        k0, _ = _log_k_pair(1.0 - nu_f[frac], x_f[frac])
        lo[frac], mid[frac], hi[frac] = k0, k1, k2

    neg = (nu_b < 0).ravel()
    if neg.any():
        lo[neg], hi[neg] = hi[neg].copy(), lo[neg].copy()
    return lo.reshape(shape), mid.reshape(shape), hi.reshape(shape)


def dlog_bessel_k_dnu(nu, x):
    """Partial derivative of log K_nu(x) with respect to the order.

    Adaptive central difference with one Richardson extrapolation; the
    step is ``max(1e-6, 1e-6 * |nu|)``.  Exactly zero at ``nu = 0`` by
    the even symmetry of ``K`` in its order.
    """
    nu, x = _validate(nu, x)
    scalar = nu.ndim == 0 and x.ndim == 0
    nu_b, x_b = np.broadcast_arrays(nu, x)
    h = np.maximum(1e-6, 1e-6 * np.abs(nu_b))

    # One stacked evaluation instead of four separate passes.
    orders = np.stack([nu_b + h, nu_b - h, nu_b + 0.5 * h, nu_b - 0.5 * h])
    vals = log_bessel_k(orders, np.broadcast_to(x_b, orders.shape))
    d_h = (vals[0] - vals[1]) / (2.0 * h)
    d_h2 = (vals[2] - vals[3]) / h
    out = (4.0 * d_h2 - d_h) / 3.0
    return float(out) if scalar else np.asarray(out)
