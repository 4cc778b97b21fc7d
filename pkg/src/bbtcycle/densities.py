"""
Scalar probability primitives used throughout the package.

Provides the gamma density and regularized lower incomplete gamma
function, the Gaussian density, Lerch's transcendent, and the wrapped
gamma density on the unit circle (the distribution of a gamma advance
reduced modulo 1).

"""

import math

import numpy as np
from scipy.special import gammaln

# Lerch series truncation: stop when the current term falls below
# LERCH_REL_TOL times the partial sum. For z = exp(-beta) with beta >= 3
# the series converges in a handful of terms; the cap only trips for
# z pathologically close to 1.
LERCH_REL_TOL = 1e-14
LERCH_MAX_TERMS = 10**6

_GAMMAINC_EPS = 1e-15
_GAMMAINC_MAX_ITER = 10**6
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class ConvergenceError(ArithmeticError):
    """A series or continued fraction failed to converge within its cap."""


def _check_positive(name, value):
    if not (value > 0.0) or not math.isfinite(value):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")


def gamma_pdf(x, shape, rate):
    """
    Gamma probability density with shape/rate parameterization.

    Parameters
    ----------
    x : float
        Evaluation point, must be >= 0.
    shape, rate : float
        Distribution parameters, both > 0.

    Returns
    -------
    float
        rate**shape / Gamma(shape) * x**(shape-1) * exp(-rate*x).
        At x = 0 the density is 0 for shape > 1, ``rate`` for shape = 1,
        and +inf for shape < 1 (integrable singularity, signalled
        explicitly rather than clipped to a finite value).

    """
    _check_positive("shape", shape)
    _check_positive("rate", rate)
    if not (x >= 0.0):
        raise ValueError(f"x must be >= 0, got {x!r}")
    if x == 0.0:
        if shape > 1.0:
            return 0.0
        if shape == 1.0:
            return float(rate)
        return math.inf
    return math.exp(
        shape * math.log(rate)
        - math.lgamma(shape)
        + (shape - 1.0) * math.log(x)
        - rate * x
    )


def _regularized_lower_gamma(v, s):
    """
    Regularized lower incomplete gamma P(s, v), vectorized.

    Uses the power series for v < s + 1 and the Lentz continued
    fraction for the upper tail otherwise; both iterated to relative
    accuracy _GAMMAINC_EPS lane by lane.

    ``v`` and ``s`` are broadcast together; s must be > 0.

    """
    v, s = np.broadcast_arrays(np.asarray(v, dtype=float), np.asarray(s, dtype=float))
    out = np.zeros(v.shape)
    # log of the shared prefactor exp(-v) v^s / Gamma(s); only needed off v=0
    pos = v > 0.0
    logpref = np.full(v.shape, -np.inf)
    logpref[pos] = -v[pos] + s[pos] * np.log(v[pos]) - gammaln(s[pos])

    series = pos & (v < s + 1.0)
    if np.any(series):
        vs = v[series]
        ss = s[series]
        ap = ss.copy()
        delt = 1.0 / ss
        total = delt.copy()
        done = np.zeros(vs.shape, dtype=bool)
        for _ in range(_GAMMAINC_MAX_ITER):
            ap += 1.0
            delt *= vs / ap
            total += delt
            done |= delt < total * _GAMMAINC_EPS
            if done.all():
                break
        else:
            raise ConvergenceError("incomplete gamma series did not converge")
        out[series] = total * np.exp(logpref[series])

    cf = pos & ~series
    if np.any(cf):
        vc = v[cf]
        sc = s[cf]
        tiny = np.finfo(float).tiny / _GAMMAINC_EPS
        b = vc + 1.0 - sc
        c = np.full(vc.shape, 1.0 / tiny)
        d = 1.0 / b
        h = d.copy()
        done = np.zeros(vc.shape, dtype=bool)
        for i in range(1, _GAMMAINC_MAX_ITER + 1):
            an = -i * (i - sc)
            b += 2.0
            d = an * d + b
            np.copyto(d, tiny, where=np.abs(d) < tiny)
            c = b + an / c
            np.copyto(c, tiny, where=np.abs(c) < tiny)
            d = 1.0 / d
            step = d * c
            h *= step
            done |= np.abs(step - 1.0) < _GAMMAINC_EPS
            if done.all():
                break
        else:
            raise ConvergenceError("incomplete gamma continued fraction did not converge")
        out[cf] = 1.0 - h * np.exp(logpref[cf])

    return np.clip(out, 0.0, 1.0)


def gamma_cdf(x, shape, rate):
    """
    Regularized lower incomplete gamma CDF G(x; shape, rate).

    Parameters
    ----------
    x : float
        Evaluation point, must be >= 0.
    shape, rate : float
        Distribution parameters, both > 0.

    Returns
    -------
    float
        P(shape, rate * x) in [0, 1], nondecreasing in x.

    """
    _check_positive("shape", shape)
    _check_positive("rate", rate)
    if not (x >= 0.0):
        raise ValueError(f"x must be >= 0, got {x!r}")
    if x == 0.0:
        return 0.0
    return float(_regularized_lower_gamma(rate * x, shape))


def normal_pdf(y, mu, sigma):
    """
    Gaussian probability density.

    Parameters
    ----------
    y : float
        Evaluation point.
    mu : float
        Mean.
    sigma : float
        Standard deviation, > 0.

    """
    _check_positive("sigma", sigma)
    z = (y - mu) / sigma
    return math.exp(-0.5 * z * z - math.log(sigma) - _LOG_SQRT_2PI)


def lerch_phi(z, s, a):
    """
    Lerch's transcendent Phi(z, s, a) = sum_{k>=0} z**k / (a + k)**s.

    Parameters
    ----------
    z : float
        Series argument, 0 <= z < 1 (geometric decay guarantees
        convergence).
    s : float
        Exponent, any real.
    a : float
        Offset, > 0.

    Returns
    -------
    float
        The series truncated when the current term is below
        LERCH_REL_TOL times the partial sum.

    Raises
    ------
    ConvergenceError
        If LERCH_MAX_TERMS terms do not reach the tolerance (z extremely
        close to 1).

    """
    if not (0.0 <= z < 1.0):
        raise ValueError(f"z must lie in [0, 1), got {z!r}")
    _check_positive("a", a)
    if not math.isfinite(s):
        raise ValueError(f"s must be finite, got {s!r}")

    term = a**-s
    total = term
    if z == 0.0:
        return total
    for k in range(1, LERCH_MAX_TERMS + 1):
        # ratio form keeps huge (a+k)**-s factors from overflowing
        term *= z * ((a + k - 1.0) / (a + k)) ** s
        total += term
        if term <= LERCH_REL_TOL * total:
            return total
    raise ConvergenceError(
        f"Lerch series did not converge within {LERCH_MAX_TERMS} terms (z={z!r})"
    )


def wrapped_advance_cdf(x, alpha, beta):
    """
    CDF of the wrapped gamma advance: P(circular advance <= x) for
    x in [0, 1], summing G(x + k) - G(k) over integer wraps k.

    Accepts scalars or arrays. The wrap terms are added until the
    remaining gamma tail is below 1e-17.

    """
    _check_positive("alpha", alpha)
    _check_positive("beta", beta)
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("x must lie in [0, 1]")
    total = np.zeros_like(arr)
    k = 0
    while True:
        low = float(_regularized_lower_gamma(beta * k, alpha)) if k else 0.0
        total += _regularized_lower_gamma(beta * (arr + k), alpha) - low
        tail = 1.0 - float(_regularized_lower_gamma(beta * (k + 1.0), alpha))
        if tail < 1e-17 or k > 10_000:
            break
        k += 1
    if np.isscalar(x):
        return float(total)
    return total


def wrapped_gamma_pdf(delta, alpha, beta):
    """
    Density of a gamma(alpha, beta) advance wrapped onto the unit circle.

    Equals the wrap sum sum_{k>=0} gamma_pdf(delta + k; alpha, beta),
    evaluated through Lerch's transcendent:

        beta**alpha / Gamma(alpha) * exp(-beta*delta)
            * Phi(exp(-beta), 1 - alpha, delta)

    Parameters
    ----------
    delta : float
        Circular advance in (0, 1]; coincident phases map to delta = 1,
        so delta = 0 is outside the domain.
    alpha, beta : float
        Gamma shape and rate of the daily advance, both > 0.

    """
    _check_positive("alpha", alpha)
    _check_positive("beta", beta)
    if not (0.0 < delta <= 1.0):
        raise ValueError(f"delta must lie in (0, 1], got {delta!r}")

    logpre = alpha * math.log(beta) - math.lgamma(alpha) - beta * delta
    z = math.exp(-beta)
    if z > 0.0 and abs(logpre) < 680.0:
        return math.exp(logpre) * lerch_phi(z, 1.0 - alpha, delta)

    # Extreme shape/rate: exp(-beta) underflows or the prefactor leaves
    # float range. Sum the wrap terms log g(delta + k) directly; the
    # exponents combine safely even when the factors individually do not.
    logs = []
    k = 0
    while True:
        lt = (
            alpha * math.log(beta)
            - math.lgamma(alpha)
            + (alpha - 1.0) * math.log(delta + k)
            - beta * (delta + k)
        )
        logs.append(lt)
        if lt < max(logs) - 60.0 or k > 10_000:
            break
        k += 1
    m = max(logs)
    if m == -math.inf:
        return 0.0
    return math.exp(m) * sum(math.exp(v - m) for v in logs)
