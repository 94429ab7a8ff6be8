"""One-dimensional marginal distributions per mixture component.

Three families: Gaussian for continuous columns, Poisson for integer columns,
ordered multinomial for ordinal columns.  Besides density/cdf/quantile, each
discrete family exposes the latent interval (b_lo, b_hi] that a standard
normal coordinate must fall in to reproduce a given observed value.

Priors follow the usual conjugate choices with empirically fixed
hyper-parameters: normal-inverse-gamma for the Gaussian margin, gamma (shape,
rate) for the Poisson rate, Jeffreys Dirichlet(1/2, ..., 1/2) for ordinal
level probabilities.  The inverse gamma uses the shape/scale convention, so
the prior variance mean C0/(c0-1) is finite for the default shape 1.28.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, ndtr, ndtri, pdtr

__all__ = [
    "GaussianMargin", "PoissonMargin", "OrdinalMargin", "MarginParams",
    "GaussianNIGPrior", "PoissonGammaPrior", "OrdinalDirichletPrior",
    "MarginPrior", "SupportError",
    "margin_cdf", "margin_quantile", "margin_logpdf", "latent_bounds",
    "cdf_array", "logpdf_array", "quantile_array", "latent_bounds_arrays",
    "default_prior", "prior_sample", "prior_logdensity",
    "conjugate_posterior_sample", "conjugate_posterior_logdensity",
]

LOG_PROB_FLOOR = 1e-10  # clip for ordinal log masses during MH evaluation


class SupportError(ValueError):
    """Value outside the support of a margin."""


@dataclass(frozen=True)
class GaussianMargin:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class PoissonMargin:
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")


class OrdinalMargin:
    """Probability vector over levels 1..m, m >= 2."""

    __slots__ = ("probs",)

    def __init__(self, probs):
        p = np.asarray(probs, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("need a probability vector of length >= 2")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be non-negative and sum to 1")
        p.setflags(write=False)
        self.probs = p

    @property
    def levels(self) -> int:
        return self.probs.size

    def __repr__(self):
        return f"OrdinalMargin({self.probs.tolist()})"

    def __eq__(self, other):
        return isinstance(other, OrdinalMargin) and np.array_equal(self.probs, other.probs)


MarginParams = GaussianMargin | PoissonMargin | OrdinalMargin


def is_discrete(margin: MarginParams) -> bool:
    return not isinstance(margin, GaussianMargin)


# ---------------------------------------------------------------------------
# cdf / quantile / log density

def cdf_array(x, margin: MarginParams) -> np.ndarray:
    """Vectorized cdf; values below the support minimum get cdf 0."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(margin, GaussianMargin):
        return ndtr((x - margin.mu) / margin.sigma)
    if isinstance(margin, PoissonMargin):
        out = np.zeros_like(x)
        m = x >= 0
        out[m] = pdtr(np.floor(x[m]), margin.rate)
        return out
    cum = np.concatenate([[0.0], np.cumsum(margin.probs)])
    cum[-1] = 1.0
    idx = np.clip(np.floor(x).astype(int), 0, margin.levels)
    out = cum[np.maximum(idx, 0)]
    out[x < 0] = 0.0
    return out


def _check_support(x, margin: MarginParams) -> None:
    x = np.asarray(x, dtype=float)
    if isinstance(margin, GaussianMargin):
        return
    if np.any(x != np.round(x)):
        raise SupportError("discrete margin evaluated at a non-integer")
    if isinstance(margin, PoissonMargin):
        if np.any(x < 0):
            raise SupportError("Poisson value must be a non-negative integer")
    elif np.any((x < 1) | (x > margin.levels)):
        raise SupportError(f"ordinal value out of range 1..{margin.levels}")


def margin_cdf(x, margin: MarginParams) -> float:
    """Cdf of one margin at a support point."""
    _check_support(x, margin)
    return float(np.ravel(cdf_array(x, margin))[0])


def quantile_array(u, margin: MarginParams) -> np.ndarray:
    """Generalized inverse cdf: smallest support value with cdf >= u."""
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u >= 1)):
        raise ValueError("probability must lie strictly in (0, 1)")
    if isinstance(margin, GaussianMargin):
        return margin.mu + margin.sigma * ndtri(u)
    if isinstance(margin, PoissonMargin):
        from scipy.stats import poisson
        return poisson.ppf(u, margin.rate)
    cum = np.cumsum(margin.probs)
    cum[-1] = 1.0
    return np.searchsorted(cum, u, side="left") + 1.0


def margin_quantile(u: float, margin: MarginParams) -> float:
    return float(quantile_array(u, margin))


def logpdf_array(x, margin: MarginParams, clip: bool = False) -> np.ndarray:
    """Vectorized log density / log mass on the support.

    With ``clip`` set, ordinal masses are floored at 1e-10 so Metropolis
    ratios stay finite; raw evaluation is unclipped.
    """
    x = np.asarray(x, dtype=float)
    _check_support(x, margin)
    if isinstance(margin, GaussianMargin):
        z = (x - margin.mu) / margin.sigma
        return -0.5 * z * z - 0.5 * np.log(2.0 * np.pi) - np.log(margin.sigma)
    if isinstance(margin, PoissonMargin):
        return x * np.log(margin.rate) - margin.rate - gammaln(x + 1.0)
    p = margin.probs[x.astype(int) - 1]
    if clip:
        p = np.maximum(p, LOG_PROB_FLOOR)
    with np.errstate(divide="ignore"):
        return np.log(p)


def margin_logpdf(x, margin: MarginParams) -> float:
    return float(logpdf_array(x, margin))


def latent_bounds(x, margin: MarginParams) -> tuple[float, float]:
    """Latent interval (b_lo, b_hi] of a discrete margin at support point x.

    The standard normal measure of the interval equals the margin mass at x;
    the first support point opens at -inf and the last closes at +inf.
    """
    if not is_discrete(margin):
        raise SupportError("latent bounds are defined for discrete margins only")
    _check_support(x, margin)
    lo = ndtri(cdf_array(np.asarray(x) - 1.0, margin))
    hi = ndtri(cdf_array(np.asarray(x), margin))
    return float(np.ravel(lo)[0]), float(np.ravel(hi)[0])


def latent_bounds_arrays(x, margin: MarginParams) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized latent bounds for a whole column of discrete observations."""
    if not is_discrete(margin):
        raise SupportError("latent bounds are defined for discrete margins only")
    x = np.asarray(x, dtype=float)
    _check_support(x, margin)
    with np.errstate(divide="ignore"):
        lo = ndtri(cdf_array(x - 1.0, margin))
        hi = ndtri(cdf_array(x, margin))
    return lo, hi


# ---------------------------------------------------------------------------
# priors

@dataclass(frozen=True)
class GaussianNIGPrior:
    """sigma^2 ~ InvGamma(c0, C0) (shape/scale), mu | sigma^2 ~ N(b0, sigma^2/N0)."""

    b0: float
    N0: float
    c0: float
    C0: float

    def __post_init__(self):
        if min(self.N0, self.c0, self.C0) <= 0:
            raise ValueError("hyper-parameters must be positive")


@dataclass(frozen=True)
class PoissonGammaPrior:
    """rate ~ Gamma(a0, A0) in shape/rate form."""

    a0: float
    A0: float

    def __post_init__(self):
        if min(self.a0, self.A0) <= 0:
            raise ValueError("hyper-parameters must be positive")


class OrdinalDirichletPrior:
    """Dirichlet over level probabilities; default Jeffreys (all 1/2)."""

    __slots__ = ("alpha",)

    def __init__(self, levels: int | None = None, concentration: float = 0.5,
                 alpha=None):
        if alpha is None:
            if levels is None or levels < 2 or concentration <= 0:
                raise ValueError("need >= 2 levels and positive concentration")
            alpha = np.full(levels, float(concentration))
        alpha = np.asarray(alpha, dtype=float)
        if alpha.ndim != 1 or alpha.size < 2 or np.any(alpha <= 0):
            raise ValueError("alpha must be a positive vector of length >= 2")
        alpha.setflags(write=False)
        self.alpha = alpha

    @property
    def levels(self) -> int:
        return self.alpha.size

    def __repr__(self):
        return f"OrdinalDirichletPrior(alpha={self.alpha.tolist()})"


MarginPrior = GaussianNIGPrior | PoissonGammaPrior | OrdinalDirichletPrior


def default_prior(column: np.ndarray, kind) -> MarginPrior:
    """Empirical hyper-parameter choices from the whole observed column.

    Gaussian: c0 = 1.28, C0 = 0.36 Var(x), b0 = mean(x), N0 = 2.6 / range(x).
    Poisson: a0 = 1, A0 = a0 n / sum(x).  Ordinal: Dirichlet(1/2, ..., 1/2).
    """
    column = np.asarray(column, dtype=float)
    if kind.tag == "continuous":
        rng_ = float(np.max(column) - np.min(column))
        var = float(np.var(column, ddof=1))
        if rng_ <= 0 or var <= 0:
            raise ValueError("constant continuous column: prior scale would vanish")
        return GaussianNIGPrior(b0=float(np.mean(column)), N0=2.6 / rng_,
                                c0=1.28, C0=0.36 * var)
    if kind.tag == "integer":
        total = float(np.sum(column))
        if total <= 0:
            raise ValueError("all-zero integer column: prior rate would diverge")
        return PoissonGammaPrior(a0=1.0, A0=column.size / total)
    return OrdinalDirichletPrior(levels=kind.levels)


def prior_sample(prior: MarginPrior, rng: np.random.Generator) -> MarginParams:
    return conjugate_posterior_sample(np.empty(0), prior, rng)


# ---------------------------------------------------------------------------
# conjugate posteriors (exact under local independence)

def _nig_posterior(values: np.ndarray, prior: GaussianNIGPrior):
    n = values.size
    if n == 0:
        return prior
    xbar = float(np.mean(values))
    Nn = prior.N0 + n
    bn = (prior.N0 * prior.b0 + n * xbar) / Nn
    cn = prior.c0 + 0.5 * n
    Cn = (prior.C0 + 0.5 * float(np.sum((values - xbar) ** 2))
          + 0.5 * prior.N0 * n * (xbar - prior.b0) ** 2 / Nn)
    return GaussianNIGPrior(b0=bn, N0=Nn, c0=cn, C0=Cn)


def posterior_hyperparams(values, prior: MarginPrior) -> MarginPrior:
    """Hyper-parameters of the conjugate posterior given assigned values."""
    values = np.asarray(values, dtype=float)
    if isinstance(prior, GaussianNIGPrior):
        return _nig_posterior(values, prior)
    if isinstance(prior, PoissonGammaPrior):
        return PoissonGammaPrior(a0=prior.a0 + float(np.sum(values)),
                                 A0=prior.A0 + values.size)
    counts = np.bincount(values.astype(int), minlength=prior.levels + 1)[1:]
    return OrdinalDirichletPrior(alpha=prior.alpha + counts)


def conjugate_posterior_sample(values, prior: MarginPrior,
                               rng: np.random.Generator) -> MarginParams:
    """One exact draw from the conjugate posterior (prior draw if no data)."""
    post = posterior_hyperparams(values, prior)
    if isinstance(post, GaussianNIGPrior):
        sigma2 = post.C0 / rng.gamma(post.c0)
        mu = rng.normal(post.b0, np.sqrt(sigma2 / post.N0))
        return GaussianMargin(mu=float(mu), sigma=float(np.sqrt(sigma2)))
    if isinstance(post, PoissonGammaPrior):
        return PoissonMargin(rate=float(rng.gamma(post.a0, 1.0 / post.A0)))
    alpha = post.alpha
    p = rng.dirichlet(alpha)
    p = p / p.sum()
    return OrdinalMargin(p)


def _nig_logpdf(margin: GaussianMargin, hp: GaussianNIGPrior) -> float:
    # density over (mu, sigma^2)
    s2 = margin.sigma ** 2
    log_ig = (hp.c0 * np.log(hp.C0) - gammaln(hp.c0)
              - (hp.c0 + 1.0) * np.log(s2) - hp.C0 / s2)
    var = s2 / hp.N0
    log_n = -0.5 * np.log(2.0 * np.pi * var) - 0.5 * (margin.mu - hp.b0) ** 2 / var
    return float(log_ig + log_n)


def _gamma_logpdf(rate: float, hp: PoissonGammaPrior) -> float:
    return float(hp.a0 * np.log(hp.A0) - gammaln(hp.a0)
                 + (hp.a0 - 1.0) * np.log(rate) - hp.A0 * rate)


def _dirichlet_logpdf(p: np.ndarray, alpha: np.ndarray) -> float:
    if np.any(p <= 0):
        return -np.inf
    return float(gammaln(alpha.sum()) - gammaln(alpha).sum()
                 + np.sum((alpha - 1.0) * np.log(p)))


def conjugate_posterior_logdensity(margin: MarginParams, values,
                                   prior: MarginPrior) -> float:
    """Log density of the conjugate posterior evaluated at a parameter value.

    For the Gaussian family the density is taken over (mu, sigma^2).
    """
    post = posterior_hyperparams(values, prior)
    if isinstance(post, GaussianNIGPrior):
        if not isinstance(margin, GaussianMargin):
            raise TypeError("parameter family does not match prior")
        return _nig_logpdf(margin, post)
    if isinstance(post, PoissonGammaPrior):
        if not isinstance(margin, PoissonMargin):
            raise TypeError("parameter family does not match prior")
        return _gamma_logpdf(margin.rate, post)
    if not isinstance(margin, OrdinalMargin):
        raise TypeError("parameter family does not match prior")
    return _dirichlet_logpdf(margin.probs, post.alpha)


def prior_logdensity(margin: MarginParams, prior: MarginPrior) -> float:
    return conjugate_posterior_logdensity(margin, np.empty(0), prior)
