"""Maximum-likelihood fits of left-bounded families and a KS goodness-of-fit test.

Families have no location parameter (support starts at 0):

* lognormal(mu, sigma)
* gamma(shape k, scale theta)
* weibull(shape k, scale lam)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError

FAMILIES = ("lognormal", "gamma", "weibull")
TOL = 1e-10
MAX_ITER = 200


@dataclass
class FitResult:
    family: str
    params: dict
    log_likelihood: float
    converged: bool
    iterations: int = 0

    def record(self) -> dict:
        out = {"family": self.family}
        out.update({f"param_{k}": v for k, v in self.params.items()})
        out.update(log_likelihood=self.log_likelihood, converged=self.converged, iterations=self.iterations)
        return out


@dataclass
class GofReport:
    ks_statistic: float
    p_value: float
    n: int
    note: str = field(default="asymptotic p-value; parameters estimated from the same data")


def _check_samples(samples, min_n: int = 10) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64).ravel()
    if len(x) < min_n:
        raise DomainError(f"need at least {min_n} samples, got {len(x)}")
    if not np.all(np.isfinite(x)):
        raise DomainError("samples must be finite")
    if np.any(x <= 0):
        raise DomainError("samples must be strictly positive")
    return x


def fit(family: str, samples) -> FitResult:
    """MLE of ``family`` parameters.

    Non-convergence (including zero-variance input) is reported through
    ``converged=False`` with the last iterate, not raised.
    """
    x = _check_samples(samples)
    if family == "lognormal":
        return _fit_lognormal(x)
    if family == "gamma":
        return _fit_gamma(x)
    if family == "weibull":
        return _fit_weibull(x)
    raise DomainError(f"unknown family {family!r}; expected one of {FAMILIES}")


def _fit_lognormal(x):
    lx = np.log(x)
    mu = float(lx.mean())
    sigma = float(lx.std())
    params = {"mu": mu, "sigma": sigma}
    if sigma <= 0:
        return FitResult("lognormal", params, float("nan"), False)
    return FitResult("lognormal", params, log_likelihood("lognormal", params, x), True)


def _fit_gamma(x):
    mean = float(x.mean())
    s = math.log(mean) - float(np.log(x).mean())
    if not s > 1e-14:
        return FitResult("gamma", {"k": float("inf"), "theta": 0.0}, float("nan"), False)
    k = (3.0 - s + math.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        f = math.log(k) - special.digamma(k) - s
        fp = 1.0 / k - special.polygamma(1, k)
        step = f / fp
        new = k - step
        while new <= 0:
            step *= 0.5
            new = k - step
        if abs(new - k) <= TOL * max(1.0, abs(new)):
            k = new
            converged = True
            break
        k = new
    params = {"k": float(k), "theta": float(mean / k)}
    return FitResult("gamma", params, log_likelihood("gamma", params, x), converged, it)


def _fit_weibull(x):
    lx = np.log(x)
    sd = float(lx.std())
    if not sd > 1e-14:
        return FitResult("weibull", {"k": float("inf"), "lam": float(x.mean())}, float("nan"), False)
    # work with x / exp(mean log x) so that powers stay in range
    shift = float(lx.mean())
    z = lx - shift
    k = math.pi / (math.sqrt(6.0) * sd)
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        w = np.exp(k * z - np.max(k * z))
        a0, a1, a2 = w.sum(), (w * z).sum(), (w * z * z).sum()
        g = a1 / a0 - 1.0 / k - z.mean()
        gp = (a2 * a0 - a1 * a1) / (a0 * a0) + 1.0 / (k * k)
        step = g / gp
        new = k - step
        while new <= 0:
            step *= 0.5
            new = k - step
        if abs(new - k) <= TOL * max(1.0, abs(new)):
            k = new
            converged = True
            break
        k = new
    m = np.max(k * z)
    lam = math.exp(shift + (m + math.log(np.mean(np.exp(k * z - m)))) / k)
    params = {"k": float(k), "lam": lam}
    return FitResult("weibull", params, log_likelihood("weibull", params, x), converged, it)


def logpdf(family: str, params: dict, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    lx = np.log(x)
    if family == "lognormal":
        mu, s = params["mu"], params["sigma"]
        return -lx - math.log(s) - 0.5 * math.log(2 * math.pi) - (lx - mu) ** 2 / (2 * s * s)
    if family == "gamma":
        k, th = params["k"], params["theta"]
        return (k - 1) * lx - x / th - special.gammaln(k) - k * math.log(th)
    if family == "weibull":
        k, lam = params["k"], params["lam"]
        return math.log(k / lam) + (k - 1) * (lx - math.log(lam)) - (x / lam) ** k
    raise DomainError(f"unknown family {family!r}")


def log_likelihood(family: str, params: dict, x) -> float:
    return float(np.sum(logpdf(family, params, x)))


def cdf(family: str, params: dict, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    pos = np.where(x > 0, x, 1.0)
    if family == "lognormal":
        out = special.ndtr((np.log(pos) - params["mu"]) / params["sigma"])
    elif family == "gamma":
        out = special.gammainc(params["k"], pos / params["theta"])
    elif family == "weibull":
        out = -np.expm1(-((pos / params["lam"]) ** params["k"]))
    else:
        raise DomainError(f"unknown family {family!r}")
    return np.where(x > 0, out, 0.0)


def sample(family: str, params: dict, n: int, seed: int) -> np.ndarray:
    g = np.random.default_rng(seed)
    if family == "lognormal":
        return g.lognormal(params["mu"], params["sigma"], n)
    if family == "gamma":
        return g.gamma(params["k"], params["theta"], n)
    if family == "weibull":
        return params["lam"] * g.weibull(params["k"], n)
    raise DomainError(f"unknown family {family!r}")


def kolmogorov_sf(lam: float, terms: int = 100) -> float:
    """P(K > lam) for the Kolmogorov distribution.

    Uses the alternating series ``2 sum (-1)^(j-1) exp(-2 j^2 lam^2)`` for
    ``lam >= 1`` and the Jacobi-theta dual form below that, where the first
    series converges too slowly.  At least ``terms`` terms are summed.
    """
    if lam <= 0:
        return 1.0
    j = np.arange(1, terms + 1, dtype=np.float64)
    if lam >= 1.0:
        q = 2.0 * np.sum((-1.0) ** (j - 1) * np.exp(-2.0 * j * j * lam * lam))
    else:
        cdf_val = math.sqrt(2 * math.pi) / lam * np.sum(np.exp(-((2 * j - 1) ** 2) * math.pi**2 / (8 * lam * lam)))
        q = 1.0 - cdf_val
    return float(min(1.0, max(0.0, q)))


def ks_statistic(samples, cdf_fn) -> float:
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = len(x)
    F = cdf_fn(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_test(samples, fit_result: FitResult) -> GofReport:
    """One-sample KS test of ``samples`` against the fitted CDF."""
    x = _check_samples(samples)
    if not fit_result.converged:
        raise DomainError("ks_test needs a converged fit")
    d = ks_statistic(x, lambda v: cdf(fit_result.family, fit_result.params, v))
    return GofReport(d, kolmogorov_sf(math.sqrt(len(x)) * d), len(x))


def fit_report_text(fr: FitResult, gof: GofReport | None = None) -> str:
    """Flat ``key=value`` record of a fit (and optional KS result)."""
    rec = fr.record()
    if gof is not None:
        rec.update(ks_statistic=gof.ks_statistic, p_value=gof.p_value, n=gof.n)
    return "".join(f"{k}={_fmt(v)}\n" for k, v in rec.items())


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)
