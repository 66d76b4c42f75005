"""Client-side LDP mechanisms, the server-side rectifier and auditing tools.

Features go through the multi-bit encoder: each client samples ``m`` of its
``d`` coordinates and reports, for every sampled coordinate, a single signed
bit drawn from a Bernoulli whose parameter is affine in the feature value.
Labels go through ``C``-ary randomized response.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels


@dataclass(frozen=True)
class MbmParams:
    """Parameters of the multi-bit mechanism."""

    eps_x: float
    alpha: float
    beta: float
    d: int
    m: int
    exp_eps: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.eps_x > 0:
            raise ValueError("eps_x must be positive")
        if not self.alpha < self.beta:
            raise ValueError("alpha must be smaller than beta")
        if not 1 <= self.m <= self.d:
            raise ValueError(f"m must lie in [1, d={self.d}], got {self.m}")
        r = self.eps_x / self.m
        object.__setattr__(self, "exp_eps", math.exp(r) if r < 700 else math.inf)

    @property
    def base_prob(self) -> float:
        """Parameter at x = alpha, i.e. 1 / (e^(eps/m) + 1)."""
        return 1.0 / (self.exp_eps + 1.0)

    @property
    def slope(self) -> float:
        """(e^(eps/m) - 1) / (e^(eps/m) + 1), evaluated without overflow."""
        return math.tanh(self.eps_x / (2.0 * self.m))

    @property
    def rectifier_scale(self) -> float:
        """Multiplier applied to an encoded entry by the rectifier."""
        return (self.d / self.m) * ((self.beta - self.alpha) / 2.0) / self.slope

    @property
    def midpoint(self) -> float:
        return (self.alpha + self.beta) / 2.0

    def rectified_values(self) -> tuple[float, float, float]:
        """Images of -1, 0 and +1 under the rectifier."""
        s, c = self.rectifier_scale, self.midpoint
        return (c - s, c, c + s)


@dataclass(frozen=True)
class RrParams:
    eps_y: float
    num_classes: int

    def __post_init__(self):
        if not self.eps_y > 0:
            raise ValueError("eps_y must be positive")
        if self.num_classes < 2:
            raise ValueError("randomized response needs at least 2 classes")

    @property
    def keep_prob(self) -> float:
        e = math.exp(self.eps_y) if self.eps_y < 700 else math.inf
        if math.isinf(e):
            return 1.0
        return e / (e + self.num_classes - 1)

    @property
    def flip_prob_per_class(self) -> float:
        """Probability of reporting one particular other class."""
        return (1.0 - self.keep_prob) / (self.num_classes - 1)


def bernoulli_param(x, params: MbmParams):
    """Raw Bernoulli parameter of the encoder for feature value(s) ``x``.

    Not clamped: values outside [alpha, beta] give parameters outside [0, 1],
    which is precisely what the poisoning attack exploits.
    """
    x = np.asarray(x, dtype=np.float64)
    out = params.base_prob + ((x - params.alpha) / (params.beta - params.alpha)) * params.slope
    return float(out) if out.ndim == 0 else out


@dataclass
class EncodeStats:
    """Running count of sampled coordinates whose raw parameter left [0, 1]."""

    out_of_range: int = 0
    sampled: int = 0


def multibit_encode_batch(x, params: MbmParams, rng: np.random.Generator, stats: EncodeStats | None = None):
    """Encode every row of ``x`` (shape ``(n, d)``), returning int8 ``(n, d)``.

    The coordinate subset uses one block of uniforms from ``rng`` and the
    Bernoulli draws a second block, in that order.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != params.d:
        raise ValueError(f"feature rows have length {x.shape[1]}, expected d={params.d}")
    probs = bernoulli_param(x, params)
    probs = np.atleast_2d(probs)
    u_select = rng.random(x.shape)
    u_bern = rng.random(x.shape)
    enc, bad = kernels.encode_rows(probs, u_select, u_bern, params.m)
    if stats is not None:
        stats.out_of_range += bad
        stats.sampled += x.shape[0] * params.m
    return enc


def multibit_encode(x, params: MbmParams, rng: np.random.Generator, stats: EncodeStats | None = None):
    """Encode a single feature row into a vector over {-1, 0, +1}."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("multibit_encode takes one feature row; use multibit_encode_batch")
    return multibit_encode_batch(x[None, :], params, rng, stats)[0]


def multibit_rectify(enc, params: MbmParams):
    """Unbiased estimate of the original features from encoded entries."""
    return params.rectifier_scale * np.asarray(enc, dtype=np.float64) + params.midpoint


def randomized_response(label, params: RrParams, rng: np.random.Generator):
    """Perturb one label or an array of labels.

    Keeps the true class with probability ``e^eps / (e^eps + C - 1)``, else
    reports a uniform draw from the other ``C - 1`` classes.
    """
    labels = np.asarray(label, dtype=np.int64)
    C = params.num_classes
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        raise ValueError(f"label outside [0, {C})")
    flat = labels.reshape(-1)
    u_keep = rng.random(flat.shape)
    shift = rng.integers(1, C, size=flat.shape)
    out = np.where(u_keep < params.keep_prob, flat, (flat + shift) % C)
    if labels.ndim == 0:
        return int(out[0])
    return out.reshape(labels.shape)


@dataclass(frozen=True)
class DomainReport:
    """Result of checking a feature row against [alpha, beta]."""

    indices: np.ndarray
    values: np.ndarray

    @property
    def ok(self) -> bool:
        return self.indices.size == 0

    def __bool__(self):
        return self.ok


def validate_feature_domain(x, alpha: float, beta: float) -> DomainReport:
    x = np.asarray(x, dtype=np.float64)
    bad = np.flatnonzero((x < alpha) | (x > beta) | ~np.isfinite(x))
    return DomainReport(bad, x[bad])


def wilson_interval(successes, trials, z: float = 1.96):
    """Wilson score interval for a binomial proportion (vectorised)."""
    successes = np.asarray(successes, dtype=np.float64)
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return np.clip(centre - half, 0.0, 1.0), np.clip(centre + half, 0.0, 1.0)


@dataclass
class RatioAudit:
    """Monte-Carlo estimates of per-dimension output-probability ratios.

    ``ratio_plus[i]`` estimates Pr[enc_i = +1 | x1] / Pr[enc_i = +1 | x2] and
    ``ratio_minus`` the same for -1. A zero denominator with a non-zero
    numerator is reported as ``inf``; 0/0 as ``nan``.
    """

    ratio_plus: np.ndarray
    ratio_minus: np.ndarray
    ci_plus: tuple
    ci_minus: tuple
    counts: dict
    trials: int
    bound: float

    @property
    def violated(self) -> bool:
        """True if some estimated ratio is infinite."""
        return bool(np.isinf(self.ratio_plus).any() or np.isinf(self.ratio_minus).any())

    def max_ratio(self) -> float:
        both = np.concatenate([self.ratio_plus, self.ratio_minus])
        both = both[~np.isnan(both)]
        return float(both.max()) if both.size else float("nan")


def _ratio(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / den
    r[(den == 0) & (num > 0)] = np.inf
    r[(den == 0) & (num == 0)] = np.nan
    return r


def _ratio_ci(ci_num, ci_den):
    lo_num, hi_num = ci_num
    lo_den, hi_den = ci_den
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = np.where(hi_den > 0, lo_num / hi_den, np.nan)
        hi = np.where(lo_den > 0, hi_num / lo_den, np.inf)
    return lo, hi


def empirical_ldp_ratio(x1, x2, params: MbmParams, trials: int, rng: np.random.Generator,
                        chunk: int = 50_000) -> RatioAudit:
    """Estimate output-probability ratios between inputs ``x1`` and ``x2``.

    Confidence intervals combine the per-probability Wilson intervals
    conservatively (lower / upper and upper / lower).
    """
    if trials < 10_000:
        raise ValueError("trials must be at least 10^4")
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.shape != (params.d,) or x2.shape != (params.d,):
        raise ValueError("x1 and x2 must both have length d")

    counts = {k: np.zeros(params.d, dtype=np.int64) for k in ("plus1", "minus1", "plus2", "minus2")}
    done = 0
    while done < trials:
        b = min(chunk, trials - done)
        e1 = multibit_encode_batch(np.broadcast_to(x1, (b, params.d)), params, rng)
        e2 = multibit_encode_batch(np.broadcast_to(x2, (b, params.d)), params, rng)
        counts["plus1"] += (e1 == 1).sum(axis=0)
        counts["minus1"] += (e1 == -1).sum(axis=0)
        counts["plus2"] += (e2 == 1).sum(axis=0)
        counts["minus2"] += (e2 == -1).sum(axis=0)
        done += b

    ci = {k: wilson_interval(v, trials) for k, v in counts.items()}
    return RatioAudit(
        ratio_plus=_ratio(counts["plus1"], counts["plus2"]),
        ratio_minus=_ratio(counts["minus1"], counts["minus2"]),
        ci_plus=_ratio_ci(ci["plus1"], ci["plus2"]),
        ci_minus=_ratio_ci(ci["minus1"], ci["minus2"]),
        counts=counts,
        trials=trials,
        bound=params.exp_eps,
    )


def analytic_output_probs(x, params: MbmParams):
    """Exact per-dimension Pr[+1] and Pr[-1] of the encoder for input ``x``."""
    t = np.clip(bernoulli_param(np.asarray(x, dtype=np.float64), params), 0.0, 1.0)
    frac = params.m / params.d
    return frac * t, frac * (1.0 - t)


def _output_weights(x, params: MbmParams):
    """Pr[+1] and Pr[-1] up to the common factor m / (d (e^(eps/m) + 1)).

    Working without the shared factor keeps every step monotone in floating
    point, so a ratio at the domain endpoints evaluates to e^(eps/m) exactly.
    """
    e = params.exp_eps
    u = (np.asarray(x, dtype=np.float64) - params.alpha) / (params.beta - params.alpha)
    plus = np.clip(1.0 + u * (e - 1.0), 0.0, e + 1.0)
    return plus, (e + 1.0) - plus


def analytic_max_ratio(x1, x2, params: MbmParams) -> float:
    """Largest exact per-dimension ratio between the output laws at x1 and x2."""
    if math.isinf(params.exp_eps):
        p1, n1 = analytic_output_probs(x1, params)
        p2, n2 = analytic_output_probs(x2, params)
    else:
        p1, n1 = _output_weights(x1, params)
        p2, n2 = _output_weights(x2, params)
    r = np.concatenate([_ratio(p1, p2), _ratio(p2, p1), _ratio(n1, n2), _ratio(n2, n1)])
    r = r[~np.isnan(r)]
    return float(r.max()) if r.size else 1.0
