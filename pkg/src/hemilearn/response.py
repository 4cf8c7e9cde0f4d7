"""Simulated users and noise-robust label acquisition.

A user accepts an offer ``(i, j, c)`` with a probability that is
non-decreasing in ``c`` and crosses 1/2 exactly at the true distance
``D*[i, j]``. Three models are provided: deterministic thresholds, a
truncated Gaussian acceptance curve, and the same curve with its noise
rate scaled down so it never exceeds a known bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Callable

import numpy as np

from .core import DistanceMatrix, InvalidInputError, LabeledDatum, Query

_PHI = NormalDist().cdf
_BELOW_HALF = math.nextafter(0.5, 0.0)

NOISE_FREE = "noise-free"
BOUNDED = "bounded"
GAUSSIAN = "truncated-gaussian"
NOISE_KINDS = (NOISE_FREE, BOUNDED, GAUSSIAN)

DEFAULT_QUERY_CAP = 10 ** 6


class BudgetExhausted(RuntimeError):
    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


class DegenerateParameters(ValueError):
    pass


@dataclass
class NoiseModel:
    kind: str = NOISE_FREE
    sigma: np.ndarray | float = 0.0
    eta_bn: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise InvalidInputError(f"unknown noise kind {self.kind!r}")
        if np.any(np.asarray(self.sigma) < 0):
            raise InvalidInputError("sigma entries must be nonnegative")
        if not 0 <= self.eta_bn < 0.5:
            raise InvalidInputError("eta_bn must lie in [0, 0.5)")

    def sigma_at(self, i: int, j: int) -> float:
        s = np.asarray(self.sigma, dtype=float)
        return float(s) if s.ndim == 0 else float(s[i, j])

    @property
    def sigma_max(self) -> float:
        return float(np.max(self.sigma))


def _truncated_cdf(c: float, d: float, beta: float, sigma: float) -> float:
    a, b = d - beta, d + beta
    if c < a:
        return 0.0
    if c > b:
        return 1.0
    lo = _PHI(-beta / sigma)
    hi = _PHI(beta / sigma)
    p = (_PHI((c - d) / sigma) - lo) / (hi - lo)
    # rounding must not move the value across 1/2 on the wrong side of d
    return max(p, 0.5) if c >= d else min(p, _BELOW_HALF)


def acceptance_probability(model: NoiseModel, D_star, i: int, j: int, c: float,
                           r: float | None = None) -> float:
    """Probability that the user accepts offer ``c`` for switching from i to j.

    ``r`` defaults to the bound stored on a :class:`DistanceMatrix`, else 1.
    """
    if isinstance(D_star, DistanceMatrix):
        D, r = D_star.entries, D_star.r if r is None else r
    else:
        D, r = np.asarray(D_star, dtype=float), 1.0 if r is None else r
    n = D.shape[0]
    if not (0 <= i < n and 0 <= j < n):
        raise InvalidInputError(f"pair ({i},{j}) out of range for n={n}")
    d = float(D[i, j])
    step = 1.0 if c >= d else 0.0
    if model.kind == NOISE_FREE:
        return step
    sigma = model.sigma_at(i, j)
    beta = min(d, r - d)
    if beta <= 0 or sigma <= 0:
        # d == 0: every offer accepted; d == r: offers below r rejected
        return step
    p = _truncated_cdf(c, d, beta, sigma)
    if model.kind == GAUSSIAN:
        return p
    # bounded: noise rate scaled by 2*eta_bn so its peak (1/2 at c == d) becomes eta_bn
    noise = p if c < d else 1.0 - p
    noise *= 2.0 * model.eta_bn
    return noise if c < d else 1.0 - noise


def noise_rate(model: NoiseModel, D_star, i: int, j: int, c: float, r: float | None = None) -> float:
    p = acceptance_probability(model, D_star, i, j, c, r)
    d = float((D_star.entries if isinstance(D_star, DistanceMatrix) else np.asarray(D_star))[i, j])
    return 1.0 - p if c >= d else p


def sample_response(model: NoiseModel, D_star, query: Query, rng: np.random.Generator) -> int:
    p = acceptance_probability(model, D_star, query.i, query.j, query.c)
    if p >= 1.0:
        return 1
    if p <= 0.0:
        return 0
    return int(rng.random() < p)


class UserOracle:
    """A simulated user answering raw offers against a ground-truth hemimetric.

    Counts every raw interaction in ``calls``.
    """

    def __init__(self, truth: DistanceMatrix, noise: NoiseModel | None = None, seed=None):
        self.truth = truth
        self.noise = noise or NoiseModel()
        self.rng = np.random.default_rng(seed)
        self.calls = 0

    @property
    def n(self) -> int:
        return self.truth.n

    @property
    def r(self) -> float:
        return self.truth.r

    def ask(self, query: Query) -> int:
        self.calls += 1
        return sample_response(self.noise, self.truth, query, self.rng)

    __call__ = ask


# -- repeated querying ---------------------------------------------------------

def _ceil_log2(x: float) -> int:
    return max(1, math.ceil(math.log2(x) - 1e-12))


@dataclass
class RobustQueryConfig:
    epsilon: float
    delta: float
    n: int
    r: float = 1.0
    alpha: float = 1.0 / 3.0
    cap: int = DEFAULT_QUERY_CAP
    delta_prime: float = field(init=False)
    delta_double_prime: float = field(init=False)

    def __post_init__(self):
        if not 0 < self.epsilon < self.r:
            raise InvalidInputError("need 0 < epsilon < r")
        if not 0 < self.delta < 1:
            raise InvalidInputError("need 0 < delta < 1")
        if not 0 < self.alpha < 0.5:
            raise InvalidInputError("need 0 < alpha < 0.5")
        steps = _ceil_log2(self.r / self.epsilon)
        self.delta_prime = self.delta / (self.n ** 2 * steps)
        robust_steps = _ceil_log2(self.r / (self.epsilon * (1 - 2 * self.alpha)))
        self.delta_double_prime = (self.delta / 3.0) * steps / robust_steps

    def per_label_delta(self, delta: float) -> float:
        """Per-label confidence parameter for a run with overall confidence ``delta``."""
        return delta / (self.n ** 2 * _ceil_log2(self.r / self.epsilon))


def confidence_radius(l: int, delta_prime: float) -> float:
    return math.sqrt(math.log(math.pi ** 2 * l ** 2 / (3.0 * delta_prime)) / (2.0 * l))


class RepeatedQuery:
    """Anytime majority vote over repeated answers to one offer.

    Feed answers with :meth:`observe`; once the empirical acceptance rate is
    separated from 1/2 by the confidence radius, :attr:`label` is set.
    """

    def __init__(self, delta_prime: float):
        self.delta_prime = delta_prime
        self.count = 0
        self.accepted = 0
        self.label: int | None = None

    def observe(self, y: int) -> int | None:
        self.count += 1
        self.accepted += int(y)
        p1 = self.accepted / self.count
        beta = confidence_radius(self.count, self.delta_prime)
        if p1 - beta >= 0.5:
            self.label = 1
        elif p1 + beta < 0.5:
            self.label = 0
        return self.label


def get_user_response_bounded(raw: Callable[[Query], int], query: Query,
                              cfg: RobustQueryConfig, cap: int | None = None) -> LabeledDatum:
    """Repeat ``query`` until its majority label is certain at level ``cfg.delta_prime``."""
    cap = cfg.cap if cap is None else cap
    vote = RepeatedQuery(cfg.delta_prime)
    while vote.label is None:
        if vote.count >= cap:
            raise BudgetExhausted(f"no decision for {query} after {cap} raw queries")
        vote.observe(raw(query))
    return LabeledDatum(query, vote.label, vote.count)


def get_user_response_unbounded(raw: Callable[[Query], int], query: Query,
                                cfg: RobustQueryConfig, cap: int | None = None) -> LabeledDatum:
    """Race three repeated queries at ``c`` and ``c -/+ alpha*eps``; first decision wins.

    The races are interleaved one raw query at a time in the order
    centre, lower, upper. The returned datum carries the offer of the winner.
    """
    cap = cfg.cap if cap is None else cap
    shift = cfg.alpha * cfg.epsilon
    offers = [
        query,
        Query(query.i, query.j, max(0.0, query.c - shift)),
        Query(query.i, query.j, min(cfg.r, query.c + shift)),
    ]
    dp = cfg.per_label_delta(cfg.delta_double_prime)
    votes = [RepeatedQuery(dp) for _ in offers]
    total = 0
    while True:
        for q, vote in zip(offers, votes):
            if total >= cap:
                raise BudgetExhausted(f"no decision for {query} after {cap} raw queries")
            total += 1
            if vote.observe(raw(q)) is not None:
                return LabeledDatum(q, vote.label, total)


def compute_gamma(n: int, delta: float, sigma_max: float, eps: float, r: float = 1.0,
                  alpha: float = 1.0 / 3.0):
    """Worst-case noise rate seen by the robust wrapper, and the repetition factor.

    Returns ``(eta_max, gamma)`` with
    ``eta_max = 1/2 - P(0 <= W <= alpha*eps) / P(|W| <= r/2)`` for
    ``W ~ N(0, sigma_max^2)`` and ``gamma = 3 ln(3 n^2 / delta) / (1/2 - eta_max)^2``.
    """
    if sigma_max <= 0:
        raise InvalidInputError("sigma_max must be positive")
    num = _PHI(alpha * eps / sigma_max) - 0.5
    den = _PHI(r / (2 * sigma_max)) - _PHI(-r / (2 * sigma_max))
    eta_max = 0.5 - num / den
    if eta_max >= 0.5 - 1e-12:
        raise DegenerateParameters(f"eta_max={eta_max} leaves no margin below 1/2")
    gamma = gamma_from_eta(n, delta, eta_max)
    return eta_max, gamma


def gamma_from_eta(n: int, delta: float, eta_max: float) -> float:
    return 3.0 * math.log(3.0 * n * n / delta) / (0.5 - eta_max) ** 2
