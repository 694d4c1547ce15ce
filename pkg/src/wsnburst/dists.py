"""Interarrival / ON / OFF / burst-size distributions.

Four laws cover every random quantity in the traffic model:

* ``Exponential`` -- memoryless times (smooth traffic, OFF periods).
* ``Pareto`` -- shifted power-law with reliability
  ``R(x) = (1 + x/(M(alpha-1)))**(-alpha)``, so ``E[X] = M`` for
  ``alpha > 1``.  Produces long-range-dependent traffic.
* ``TPT`` -- truncated power tail: a T-branch hyperexponential whose
  reliability ``R(x) = (1-theta)/(1-theta^T) * sum_j theta^j exp(-mu x / lam^j)``
  mimics a power tail up to truncation level T.  T=1 is exactly
  exponential; T -> infinity approaches a true power tail.
* ``Deterministic`` -- a point mass (value 0 is allowed and stands for a
  degenerate "never idle" OFF law).

Sampling is inverse-transform throughout, with the uniform draw taken
as the survival probability: ``reliability(spec, sample(spec, u)) == u``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from .rng import open_uniform, open_uniform_array


class ParameterError(ValueError):
    """A distribution or model parameter is outside its valid domain."""


@dataclass(frozen=True)
class Exponential:
    mean: float

    def __post_init__(self):
        if not self.mean > 0.0:
            raise ParameterError(f"Exponential mean must be > 0, got {self.mean}")


@dataclass(frozen=True)
class Pareto:
    """Shifted Pareto with shape ``alpha`` (> 1 so the mean is finite) and mean ``mean``."""

    alpha: float
    mean: float

    def __post_init__(self):
        if not self.alpha > 1.0:
            raise ParameterError(f"Pareto alpha must be > 1, got {self.alpha}")
        if not self.mean > 0.0:
            raise ParameterError(f"Pareto mean must be > 0, got {self.mean}")

    @property
    def scale(self) -> float:
        # R(x) = (1 + x/scale)^(-alpha)
        return self.mean * (self.alpha - 1.0)


@dataclass(frozen=True)
class TPT:
    """Truncated power tail: mixture of T exponentials with geometrically
    decaying weights ``(1-theta) theta^j / (1-theta^T)`` and rates ``mu / lam^j``."""

    theta: float
    T: int
    lam: float
    mu: float

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ParameterError(f"TPT theta must be in (0,1), got {self.theta}")
        if not (isinstance(self.T, int) and self.T >= 1):
            raise ParameterError(f"TPT truncation level T must be an integer >= 1, got {self.T}")
        if not self.lam > 1.0:
            raise ParameterError(f"TPT lam must be > 1, got {self.lam}")
        if not self.mu > 0.0:
            raise ParameterError(f"TPT mu must be > 0, got {self.mu}")

    def branch_weights(self) -> np.ndarray:
        j = np.arange(self.T)
        w = (1.0 - self.theta) * self.theta**j / (1.0 - self.theta**self.T)
        return w

    def branch_means(self) -> np.ndarray:
        return self.lam ** np.arange(self.T) / self.mu


@dataclass(frozen=True)
class Deterministic:
    value: float

    def __post_init__(self):
        if not self.value >= 0.0:
            raise ParameterError(f"Deterministic value must be >= 0, got {self.value}")


DistributionSpec = Union[Exponential, Pareto, TPT, Deterministic]


def reliability(spec: DistributionSpec, x) -> float:
    """Survival function R(x) = Pr(X > x).  Accepts scalars or arrays."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise ParameterError("reliability requires x >= 0")
    if isinstance(spec, Exponential):
        out = np.exp(-x / spec.mean)
    elif isinstance(spec, Pareto):
        out = (1.0 + x / spec.scale) ** (-spec.alpha)
    elif isinstance(spec, TPT):
        w = spec.branch_weights()
        rates = spec.mu / spec.lam ** np.arange(spec.T)
        out = np.einsum("j,j...->...", w, np.exp(-np.multiply.outer(rates, x)))
        out = np.clip(out, 0.0, 1.0)  # weight normalization is 1 +- eps
    elif isinstance(spec, Deterministic):
        out = np.where(x < spec.value, 1.0, 0.0)
    else:
        raise ParameterError(f"unknown distribution spec: {spec!r}")
    return float(out) if out.ndim == 0 else out


def mean_of(spec: DistributionSpec) -> float:
    """Analytic mean of the distribution."""
    if isinstance(spec, Exponential):
        return spec.mean
    if isinstance(spec, Pareto):
        return spec.mean
    if isinstance(spec, Deterministic):
        return spec.value
    if isinstance(spec, TPT):
        # mean = (1-theta)/((1-theta^T) mu) * sum_{j<T} (theta lam)^j
        x = spec.theta * spec.lam
        if abs(x - 1.0) < 1e-12:
            geo = float(spec.T)
        else:
            geo = (1.0 - x**spec.T) / (1.0 - x)
        return (1.0 - spec.theta) / ((1.0 - spec.theta**spec.T) * spec.mu) * geo
    raise ParameterError(f"unknown distribution spec: {spec!r}")


def sample(spec: DistributionSpec, rng: np.random.Generator) -> float:
    """One inverse-transform draw.  The uniform is the survival probability,
    so ``reliability(spec, sample(spec, rng))`` reproduces the drawn uniform
    for the invertible laws."""
    if isinstance(spec, Deterministic):
        return spec.value  # consumes no randomness
    if isinstance(spec, Exponential):
        return -spec.mean * math.log(open_uniform(rng))
    if isinstance(spec, Pareto):
        u = open_uniform(rng)
        return spec.scale * (u ** (-1.0 / spec.alpha) - 1.0)
    if isinstance(spec, TPT):
        if spec.T == 1:
            # single branch: bitwise-identical to Exponential(1/mu)
            return -(1.0 / spec.mu) * math.log(open_uniform(rng))
        cum = np.cumsum(spec.branch_weights())
        j = int(np.searchsorted(cum, rng.random(), side="right"))
        j = min(j, spec.T - 1)
        scale = spec.lam**j / spec.mu
        return -scale * math.log(open_uniform(rng))
    raise ParameterError(f"unknown distribution spec: {spec!r}")


def sample_array(spec: DistributionSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    """n inverse-transform draws; same transforms as ``sample`` (branch
    uniform first for TPT, then magnitude)."""
    if n < 0:
        raise ParameterError("n must be >= 0")
    if isinstance(spec, Deterministic):
        return np.full(n, spec.value)
    if isinstance(spec, Exponential):
        return -spec.mean * np.log(open_uniform_array(rng, n))
    if isinstance(spec, Pareto):
        u = open_uniform_array(rng, n)
        return spec.scale * (u ** (-1.0 / spec.alpha) - 1.0)
    if isinstance(spec, TPT):
        if spec.T == 1:
            return -(1.0 / spec.mu) * np.log(open_uniform_array(rng, n))
        cum = np.cumsum(spec.branch_weights())
        j = np.searchsorted(cum, rng.random(n), side="right")
        np.minimum(j, spec.T - 1, out=j)
        scale = spec.lam ** j.astype(float) / spec.mu
        return -scale * np.log(open_uniform_array(rng, n))
    raise ParameterError(f"unknown distribution spec: {spec!r}")


def tpt_calibrate(theta: float, alpha: float, target_mean: float, T: int,
                  lam: float | None = None) -> TPT:
    """Build a TPT spec whose untruncated tail decays as ``x**(-alpha)``
    and whose mean equals ``target_mean``.

    The geometric rate factor defaults to ``lam = theta**(-1/alpha)`` (the
    standard power-tail construction, i.e. ``theta * lam**alpha == 1``) and
    may be overridden; ``mu`` is then solved exactly from the closed-form
    mean, so the calibration error is at the floating-point level.
    """
    if not 0.0 < theta < 1.0:
        raise ParameterError(f"theta must be in (0,1), got {theta}")
    if not alpha > 1.0:
        raise ParameterError(f"alpha must be > 1, got {alpha}")
    if not target_mean > 0.0:
        raise ParameterError(f"target_mean must be > 0, got {target_mean}")
    if not (isinstance(T, int) and T >= 1):
        raise ParameterError(f"T must be an integer >= 1, got {T}")
    if lam is None:
        lam = theta ** (-1.0 / alpha)
    x = theta * lam
    if abs(x - 1.0) < 1e-12:
        geo = float(T)
    else:
        geo = (1.0 - x**T) / (1.0 - x)
    mean_at_unit_mu = (1.0 - theta) / (1.0 - theta**T) * geo
    return TPT(theta=theta, T=T, lam=lam, mu=mean_at_unit_mu / target_mean)


def to_config(spec: DistributionSpec) -> dict:
    """JSON-serializable form used inside sweep configuration files."""
    if isinstance(spec, Exponential):
        return {"kind": "exp", "mean": spec.mean}
    if isinstance(spec, Pareto):
        return {"kind": "pareto", "alpha": spec.alpha, "mean": spec.mean}
    if isinstance(spec, TPT):
        # lam/mu give the exact round trip; alpha/mean are the descriptive
        # form (alpha is the tail index implied by lam)
        return {"kind": "tpt", "theta": spec.theta, "T": spec.T,
                "lam": spec.lam, "mu": spec.mu,
                "alpha": math.log(1.0 / spec.theta) / math.log(spec.lam),
                "mean": mean_of(spec)}
    if isinstance(spec, Deterministic):
        return {"kind": "det", "value": spec.value}
    raise ParameterError(f"unknown distribution spec: {spec!r}")


def from_config(obj: dict) -> DistributionSpec:
    """Inverse of ``to_config``.  A tpt entry may give (theta, alpha, T, mean)
    instead of explicit (lam, mu); it is then calibrated."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ParameterError(f"distribution config must be an object with a 'kind': {obj!r}")
    kind = obj["kind"]
    try:
        if kind == "exp":
            return Exponential(mean=float(obj["mean"]))
        if kind == "pareto":
            return Pareto(alpha=float(obj.get("alpha", 1.4)), mean=float(obj["mean"]))
        if kind == "det":
            return Deterministic(value=float(obj["value"]))
        if kind == "tpt":
            if "mu" in obj and "lam" in obj:
                return TPT(theta=float(obj["theta"]), T=int(obj["T"]),
                           lam=float(obj["lam"]), mu=float(obj["mu"]))
            return tpt_calibrate(theta=float(obj.get("theta", 0.5)),
                                 alpha=float(obj.get("alpha", 1.4)),
                                 target_mean=float(obj["mean"]), T=int(obj["T"]))
    except KeyError as exc:
        raise ParameterError(f"distribution config {obj!r} is missing key {exc}") from None
    raise ParameterError(f"unknown distribution kind {kind!r}")


def rescale(spec: DistributionSpec, new_mean: float) -> DistributionSpec:
    """Same distribution shape, scaled so the mean equals ``new_mean``."""
    if isinstance(spec, Exponential):
        return Exponential(mean=new_mean)
    if isinstance(spec, Pareto):
        return Pareto(alpha=spec.alpha, mean=new_mean)
    if isinstance(spec, Deterministic):
        return Deterministic(value=new_mean)
    if isinstance(spec, TPT):
        return replace(spec, mu=spec.mu * mean_of(spec) / new_mean)
    raise ParameterError(f"unknown distribution spec: {spec!r}")
