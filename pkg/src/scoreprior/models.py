"""Likelihoods and data containers for the experiment families.

Four model families appear in the studies: a normal with unknown standard
deviation, a lognormal with unknown location, finite Gaussian mixtures,
and a two-level Gaussian hierarchy with known per-group standard errors.
Scalar likelihoods cache sufficient statistics so samplers can call them
tens of thousands of times cheaply.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from .errors import DataValidationError, DomainError

__all__ = [
    "NormalScaleModel",
    "LogNormalLocationModel",
    "MixtureModel",
    "EightSchoolsData",
    "HierarchicalState",
    "loglik_normal_scale",
    "loglik_lognormal_loc",
    "loglik_mixture",
    "sample_mixture",
    "loglik_hierarchical",
    "GalaxyData",
    "load_galaxy_data",
    "SINGLE_SAMPLE_MIXTURE",
    "REPEAT_MIXTURES",
]

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class NormalScaleModel:
    """N(mu0, sigma^2) data with known mean; sigma is the parameter."""

    data: np.ndarray
    mu0: float = 0.0

    def __post_init__(self):
        y = np.asarray(self.data, dtype=float)
        if y.ndim != 1 or y.size == 0:
            raise DataValidationError("data must be a nonempty 1-d vector")
        object.__setattr__(self, "data", y)
        object.__setattr__(self, "_n", y.size)
        object.__setattr__(self, "_ss", float(np.sum((y - self.mu0) ** 2)))

    @property
    def n(self) -> int:
        return self._n

    @property
    def sum_sq(self) -> float:
        """Sum of squared deviations from the known mean."""
        return self._ss

    def mle(self) -> float:
        return math.sqrt(self._ss / self._n)

    def loglik(self, sigma: float) -> float:
        if sigma <= 0:
            raise DomainError(f"sigma must be positive, got {sigma}")
        return (-0.5 * self._n * _LOG_2PI - self._n * math.log(sigma)
                - self._ss / (2.0 * sigma * sigma))


@dataclass(frozen=True)
class LogNormalLocationModel:
    """Lognormal data with known log-scale sigma0; mu is the parameter."""

    data: np.ndarray
    sigma0: float = 1.0

    def __post_init__(self):
        y = np.asarray(self.data, dtype=float)
        if y.ndim != 1 or y.size == 0:
            raise DataValidationError("data must be a nonempty 1-d vector")
        if np.any(y <= 0):
            raise DataValidationError("lognormal data must be strictly positive")
        if self.sigma0 <= 0:
            raise DomainError("sigma0 must be positive")
        logs = np.log(y)
        object.__setattr__(self, "data", y)
        object.__setattr__(self, "_n", y.size)
        object.__setattr__(self, "_mean_log", float(logs.mean()))
        object.__setattr__(self, "_ss_log", float(np.sum((logs - logs.mean()) ** 2)))
        object.__setattr__(self, "_sum_log", float(logs.sum()))

    @property
    def n(self) -> int:
        return self._n

    def mle(self) -> float:
        return self._mean_log

    def loglik(self, mu: float) -> float:
        # Gaussian likelihood of log-data plus the exact 1/y Jacobian
        s2 = self.sigma0 * self.sigma0
        dev = self._ss_log + self._n * (self._mean_log - mu) ** 2
        return (-0.5 * self._n * _LOG_2PI - self._n * math.log(self.sigma0)
                - dev / (2.0 * s2) - self._sum_log)


def loglik_normal_scale(model: NormalScaleModel, sigma: float) -> float:
    return model.loglik(sigma)


def loglik_lognormal_loc(model: LogNormalLocationModel, mu: float) -> float:
    return model.loglik(mu)


@dataclass(frozen=True)
class MixtureModel:
    """Finite Gaussian mixture with weights, means, and sds."""

    weights: np.ndarray
    means: np.ndarray
    sds: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        m = np.asarray(self.means, dtype=float)
        s = np.asarray(self.sds, dtype=float)
        if not (w.shape == m.shape == s.shape) or w.ndim != 1 or w.size == 0:
            raise DomainError("weights, means, sds must be 1-d vectors of equal length")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights must sum to 1, got {w.sum()!r}")
        if np.any(w < 0):
            raise DomainError("weights must be non-negative")
        if np.any(s <= 0):
            raise DomainError("all component sds must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "sds", s)

    @property
    def k(self) -> int:
        return int(self.weights.size)


def loglik_mixture(model: MixtureModel, data: np.ndarray) -> float:
    """Sum over observations of log sum_l w_l N(y; mu_l, sd_l^2)."""
    y = np.asarray(data, dtype=float)
    if y.size == 0:
        raise DomainError("mixture log-likelihood of empty data is undefined")
    z = (y[:, None] - model.means[None, :]) / model.sds[None, :]
    comp = (np.log(model.weights)[None, :] - np.log(model.sds)[None, :]
            - 0.5 * _LOG_2PI - 0.5 * z * z)
    return float(np.sum(logsumexp(comp, axis=1)))


def sample_mixture(model: MixtureModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Ancestral draw: component labels, then Gaussians."""
    if n < 1:
        raise DomainError("need n >= 1")
    labels = rng.choice(model.k, size=n, p=model.weights)
    return rng.normal(model.means[labels], model.sds[labels])


_SCHOOLS_Y = (28.0, 8.0, -3.0, 7.0, -1.0, 1.0, 18.0, 12.0)
_SCHOOLS_S = (15.0, 10.0, 16.0, 11.0, 9.0, 11.0, 10.0, 18.0)


@dataclass(frozen=True)
class EightSchoolsData:
    """Eight treatment-effect estimates with known standard errors."""

    y: np.ndarray = field(default_factory=lambda: np.array(_SCHOOLS_Y))
    s: np.ndarray = field(default_factory=lambda: np.array(_SCHOOLS_S))

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        s = np.asarray(self.s, dtype=float)
        if y.shape != s.shape or y.ndim != 1:
            raise DataValidationError("y and s must be 1-d vectors of equal length")
        if np.any(s <= 0):
            raise DataValidationError("standard errors must be positive")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "s", s)

    @property
    def n_groups(self) -> int:
        return int(self.y.size)


@dataclass(frozen=True)
class HierarchicalState:
    """One point in the hierarchical parameter space."""

    mu: float
    alpha: np.ndarray
    sigma_alpha2: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))
        if self.sigma_alpha2 <= 0:
            raise DomainError("sigma_alpha2 must be positive")


def loglik_hierarchical(data: EightSchoolsData, state: HierarchicalState) -> float:
    """Joint log density of effects given parameters plus the effect prior layer."""
    if state.alpha.shape != data.y.shape:
        raise DomainError("one alpha per group is required")
    if state.sigma_alpha2 <= 0:
        raise DomainError("sigma_alpha2 must be positive")
    resid = data.y - state.mu - state.alpha
    obs = -0.5 * np.sum(_LOG_2PI + 2.0 * np.log(data.s) + (resid / data.s) ** 2)
    v = state.sigma_alpha2
    grp = -0.5 * np.sum(_LOG_2PI + math.log(v) + state.alpha ** 2 / v)
    return float(obs + grp)


# ---------------------------------------------------------------------------
# datasets and experiment presets
# ---------------------------------------------------------------------------

class GalaxyData(NamedTuple):
    values: np.ndarray  # velocities in 1000 km/s
    sha256: str
    path: str


def load_galaxy_data(path: str | Path | None = None) -> GalaxyData:
    """Read the 82 Corona Borealis galaxy velocities (units: 1000 km/s).

    One velocity per line.  The file shipped with the package is used when
    no path is given.  Validation is strict: exactly 82 values, all inside
    (5, 40), since silent unit mistakes (km/s vs 1000 km/s) are the common
    failure with this dataset.
    """
    if path is None:
        path = resources.files("scoreprior").joinpath("data/galaxies.txt")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(
            f"galaxy data file not found at {path}; supply a plain-text file "
            "with the 82 velocities, one per line, in units of 1000 km/s"
        )
    raw = path.read_bytes()
    values = []
    for lineno, line in enumerate(raw.decode("ascii").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise DataValidationError(
                f"{path}:{lineno}: expected one number per line, got {line!r}"
            ) from None
    arr = np.array(values)
    if arr.size != 82:
        raise DataValidationError(f"expected 82 velocities, found {arr.size}")
    if np.any(arr <= 5.0) or np.any(arr >= 40.0):
        raise DataValidationError(
            "velocities out of the plausible (5, 40) range; "
            "check the units are 1000 km/s"
        )
    return GalaxyData(values=arr, sha256=hashlib.sha256(raw).hexdigest(),
                      path=str(path))


SINGLE_SAMPLE_MIXTURE = MixtureModel(
    weights=(0.25, 0.65, 0.10),
    means=(0.0, -10.0, 7.0),
    sds=(1.2, 1.0, 0.8),
)

# nested three/four/five-component designs with equal weights
REPEAT_MIXTURES = {
    3: MixtureModel(weights=(1 / 3,) * 3, means=(-10.0, 0.0, 7.0),
                    sds=(1.0, 0.8, 1.2)),
    4: MixtureModel(weights=(0.25,) * 4, means=(-10.0, -3.0, 0.0, 7.0),
                    sds=(1.0, 0.9, 0.8, 1.2)),
    5: MixtureModel(weights=(0.2,) * 5, means=(-10.0, -3.0, 0.0, 3.0, 7.0),
                    sds=(1.0, 0.9, 0.8, 1.0, 1.2)),
}
