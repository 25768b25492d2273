"""Seeded, reproducible MCMC samplers.

All randomness flows through numpy's PCG64 Generator.  An experiment with
seed s derives two independent streams via SeedSequence: [s, 0] for data
generation and [s, 1] for the sampler, so changing the chain schedule
never perturbs the simulated data.  Replicate r of a replication study
uses seed base_seed + r.  Every sampler is a pure function of
(data, config); repeated calls are bit-identical.

Proposal scales adapt during burn-in only (Robbins-Monro drift toward a
0.35 acceptance rate) and are frozen for the retained phase, so the kept
draws come from a fixed-kernel Markov chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigError, DomainError, InitializationError
from .models import EightSchoolsData
from .priors import ComparatorPrior, ScorePriorPositive, ScorePriorReal

__all__ = [
    "DATA_STREAM",
    "CHAIN_STREAM",
    "data_rng",
    "chain_rng",
    "McmcConfig",
    "Chain",
    "MixturePriors",
    "rw_metropolis",
    "mwg_mixture",
    "relabel_by_weight",
    "hierarchical_sampler",
    "school_effect_conditional",
    "grand_mean_conditional",
]

DATA_STREAM = 0
CHAIN_STREAM = 1

_RM_TARGET = 0.35  # burn-in acceptance target
_RM_DECAY = 0.6


def data_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, DATA_STREAM]))


def chain_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, CHAIN_STREAM]))


@dataclass(frozen=True)
class McmcConfig:
    n_iter: int = 6000
    burn_in: int = 1000
    thin: int = 10
    seed: int = 0
    proposal_sd: float | Mapping[str, float] = 0.5
    adapt: bool = True

    def __post_init__(self):
        if self.n_iter < 1:
            raise ConfigError("n_iter must be >= 1")
        if not 0 <= self.burn_in < self.n_iter:
            raise ConfigError("need 0 <= burn_in < n_iter")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        scales = (self.proposal_sd.values()
                  if isinstance(self.proposal_sd, Mapping) else [self.proposal_sd])
        for s in scales:
            if not s > 0:
                raise ConfigError(f"proposal_sd must be positive, got {s}")

    @property
    def n_kept(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin

    def scale_for(self, block: str) -> float:
        if isinstance(self.proposal_sd, Mapping):
            return float(self.proposal_sd.get(block, 0.5))
        return float(self.proposal_sd)

    def to_lines(self) -> list[str]:
        sd = self.proposal_sd
        if isinstance(sd, Mapping):
            sd = ",".join(f"{k}={v}" for k, v in sorted(sd.items()))
        return [
            f"n_iter: {self.n_iter}",
            f"burn_in: {self.burn_in}",
            f"thin: {self.thin}",
            f"seed: {self.seed}",
            f"proposal_sd: {sd}",
            f"adapt: {str(self.adapt).lower()}",
        ]


@dataclass(frozen=True)
class Chain:
    """Kept draws of one sampler run, with the config that produced them."""

    draws: np.ndarray
    names: tuple[str, ...]
    acceptance: dict[str, float]
    config: McmcConfig
    tuned: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=float)
        object.__setattr__(self, "draws", draws)
        object.__setattr__(self, "names", tuple(self.names))
        if draws.ndim != 2 or draws.shape[1] != len(self.names):
            raise DomainError("draws must be (kept, len(names))")
        if draws.shape[0] != self.config.n_kept:
            raise DomainError(
                f"row count {draws.shape[0]} does not match the schedule's "
                f"kept-sample count {self.config.n_kept}"
            )
        for k, v in self.acceptance.items():
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"acceptance rate {k}={v} outside [0, 1]")

    @property
    def n_kept(self) -> int:
        return int(self.draws.shape[0])

    def column(self, name: str) -> np.ndarray:
        try:
            return self.draws[:, self.names.index(name)]
        except ValueError:
            raise DomainError(f"no parameter named {name!r} in {self.names}") from None

    def mean(self) -> np.ndarray:
        return self.draws.mean(axis=0)

    def quantiles(self, probs) -> np.ndarray:
        return np.quantile(self.draws, probs, axis=0)

    def interval95(self, name: str) -> tuple[float, float]:
        col = self.column(name)
        return (float(np.quantile(col, 0.025)), float(np.quantile(col, 0.975)))

    def acceptance_in(self, lo: float = 0.1, hi: float = 0.6) -> bool:
        return all(lo <= v <= hi for v in self.acceptance.values())

    def to_csv(self, path) -> None:
        """Write draws as CSV (repr-formatted floats, so byte-stable) plus
        a .config.txt sidecar echoing the schedule."""
        path = Path(path)
        with open(path, "w") as fh:
            fh.write(",".join(self.names) + "\n")
            for row in self.draws:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        sidecar = path.with_name(path.stem + ".config.txt")
        lines = self.config.to_lines()
        lines.append("# acceptance: " + ",".join(
            f"{k}={v:.4f}" for k, v in sorted(self.acceptance.items())))
        sidecar.write_text("\n".join(lines) + "\n")


def _keep_mask_count(cfg: McmcConfig, t: int) -> bool:
    """True when 0-indexed sweep t is retained."""
    return t >= cfg.burn_in and (t - cfg.burn_in + 1) % cfg.thin == 0


# ---------------------------------------------------------------------------
# random-walk Metropolis for a scalar parameter
# ---------------------------------------------------------------------------

def rw_metropolis(log_post: Callable[[float], float], init: float,
                  cfg: McmcConfig, log_scale: bool = False,
                  name: str = "theta") -> Chain:
    """Gaussian random-walk Metropolis on one coordinate.

    With log_scale=True the walk runs on log(theta) with the Jacobian
    folded into the target, which is how every positive parameter in the
    experiments is sampled.
    """
    scale = cfg.scale_for(name)
    if log_scale:
        if init <= 0:
            raise InitializationError("log-scale sampling needs a positive init")
        lp = lambda t: log_post(math.exp(t)) + t
        x = math.log(init)
    else:
        lp = log_post
        x = float(init)
    cur = lp(x)
    if not math.isfinite(cur):
        raise InitializationError(
            f"log posterior is {cur} at the initial value {init}"
        )
    rng = chain_rng(cfg.seed)
    steps = rng.standard_normal(cfg.n_iter)
    logu = np.log(rng.random(cfg.n_iter))
    ls = math.log(scale)
    kept = np.empty((cfg.n_kept, 1))
    ki = 0
    accepted_post = 0
    for t in range(cfg.n_iter):
        prop = x + math.exp(ls) * steps[t]
        lpp = lp(prop)
        ok = logu[t] < lpp - cur
        if ok:
            x, cur = prop, lpp
        if t < cfg.burn_in:
            if cfg.adapt:
                ls += ((1.0 if ok else 0.0) - _RM_TARGET) / (t + 1) ** _RM_DECAY
        else:
            accepted_post += ok
            if (t - cfg.burn_in + 1) % cfg.thin == 0:
                kept[ki, 0] = x
                ki += 1
    draws = np.exp(kept) if log_scale else kept
    rate = accepted_post / (cfg.n_iter - cfg.burn_in)
    return Chain(draws=draws, names=(name,), acceptance={name: rate},
                 config=cfg, tuned={name: math.exp(ls)})


# ---------------------------------------------------------------------------
# Metropolis-within-Gibbs for Gaussian mixtures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixturePriors:
    """Component-wise independent priors; weights get Dirichlet(1,...,1)."""

    mu: ScorePriorReal = field(default_factory=ScorePriorReal)
    sigma: ScorePriorPositive = field(default_factory=ScorePriorPositive)


def _quantile_partition_init(y: np.ndarray, k: int):
    """Deterministic start: component l owns the l-th block of sorted data.

    Splitting the sorted sample into k equal-count blocks gives a start
    that is a deterministic, label-stable function of the data alone:
    block means are ascending by construction, so the initial labels
    agree with the ascending-mean identification.  Block sds are floored
    away from zero so duplicate-heavy blocks cannot start a chain at a
    degenerate scale.
    """
    ys = np.sort(y)
    blocks = np.array_split(ys, k)
    mu = np.array([b.mean() for b in blocks])
    floor = max(0.05 * y.std(), 1e-3)
    sd = np.array([max(b.std(), floor) for b in blocks])
    omega = np.full(k, 1.0 / k)
    return omega, mu, sd


def mwg_mixture(data: np.ndarray, k: int, priors: MixturePriors,
                cfg: McmcConfig) -> Chain:
    """Gibbs on allocations and weights, random-walk MH per component on
    means and (log) sds.

    Given allocations, the component likelihood terms separate, so each
    sweep updates all k means (then all k sds) with independent proposals
    from per-component sufficient statistics; cost per sweep is O(kn) for
    the allocation step and O(k) for everything else.
    """
    y = np.asarray(data, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ConfigError("data must be a nonempty 1-d vector")
    n = y.size
    if k < 1:
        raise ConfigError("k must be >= 1")
    if k > n:
        raise ConfigError(f"k={k} components with only n={n} observations")
    rng = chain_rng(cfg.seed)
    y2 = y * y
    omega, mu, sd = _quantile_partition_init(y, k)
    a_mu = priors.mu.a
    a_sd = priors.sigma.a
    ls_mu = np.full(k, math.log(cfg.scale_for("mu")))
    ls_sd = np.full(k, math.log(cfg.scale_for("sigma")))
    kept = np.empty((cfg.n_kept, 3 * k))
    ki = 0
    acc_mu = np.zeros(k)
    acc_sd = np.zeros(k)
    n_post = cfg.n_iter - cfg.burn_in

    for t in range(cfg.n_iter):
        # allocations: Gumbel-max over component log densities
        logp = (np.log(omega)[:, None] - np.log(sd)[:, None]
                - 0.5 * ((y[None, :] - mu[:, None]) / sd[:, None]) ** 2)
        gumbel = -np.log(-np.log(rng.random((k, n))))
        z = np.argmax(logp + gumbel, axis=0)
        counts = np.bincount(z, minlength=k).astype(float)
        sums = np.bincount(z, weights=y, minlength=k)
        sqs = np.bincount(z, weights=y2, minlength=k)

        omega = np.clip(rng.dirichlet(1.0 + counts), 1e-300, None)

        # means: independent MH per component
        prop = mu + np.exp(ls_mu) * rng.standard_normal(k)
        var2 = 2.0 * sd * sd
        ll_cur = -(sqs - 2.0 * mu * sums + counts * mu * mu) / var2
        ll_new = -(sqs - 2.0 * prop * sums + counts * prop * prop) / var2
        pr_cur = -2.0 * np.log(np.abs(mu) + a_mu)
        pr_new = -2.0 * np.log(np.abs(prop) + a_mu)
        ok = np.log(rng.random(k)) < (ll_new - ll_cur + pr_new - pr_cur)
        mu = np.where(ok, prop, mu)
        if t < cfg.burn_in:
            if cfg.adapt:
                ls_mu += (ok - _RM_TARGET) / (t + 1) ** _RM_DECAY
        else:
            acc_mu += ok

        # sds: MH on the log scale with Jacobian
        lt = np.log(sd)
        prop_lt = lt + np.exp(ls_sd) * rng.standard_normal(k)
        prop_sd = np.exp(prop_lt)
        dev = sqs - 2.0 * mu * sums + counts * mu * mu
        ll_cur = -counts * lt - dev / (2.0 * sd * sd)
        ll_new = -counts * prop_lt - dev / (2.0 * prop_sd * prop_sd)
        pr_cur = -2.0 * np.log(sd + a_sd)
        pr_new = -2.0 * np.log(prop_sd + a_sd)
        ok = np.log(rng.random(k)) < (
            ll_new - ll_cur + pr_new - pr_cur + prop_lt - lt)
        sd = np.where(ok, prop_sd, sd)
        if t < cfg.burn_in:
            if cfg.adapt:
                ls_sd += (ok - _RM_TARGET) / (t + 1) ** _RM_DECAY
        else:
            acc_sd += ok

        if _keep_mask_count(cfg, t):
            kept[ki, :k] = omega
            kept[ki, k:2 * k] = mu
            kept[ki, 2 * k:] = sd
            ki += 1

    names = tuple([f"omega_{l + 1}" for l in range(k)]
                  + [f"mu_{l + 1}" for l in range(k)]
                  + [f"sigma_{l + 1}" for l in range(k)])
    acceptance = {}
    tuned = {}
    for l in range(k):
        acceptance[f"mu_{l + 1}"] = acc_mu[l] / n_post
        acceptance[f"sigma_{l + 1}"] = acc_sd[l] / n_post
        tuned[f"mu_{l + 1}"] = math.exp(ls_mu[l])
        tuned[f"sigma_{l + 1}"] = math.exp(ls_sd[l])
    return Chain(draws=kept, names=names, acceptance=acceptance, config=cfg,
                 tuned=tuned)


def _mixture_layout(chain: Chain) -> int:
    """Component count of a mixture chain; raises if the layout is foreign."""
    k, rem = divmod(len(chain.names), 3)
    expected = tuple([f"omega_{l + 1}" for l in range(k)]
                     + [f"mu_{l + 1}" for l in range(k)]
                     + [f"sigma_{l + 1}" for l in range(k)])
    if rem != 0 or chain.names != expected:
        raise DomainError("not a mixture chain; expected omega/mu/sigma blocks")
    return k


def relabel_by_weight(chain: Chain) -> Chain:
    """Sort components of every draw by weight, descending.

    Ties break by mean, ascending.  Idempotent; the mixture density each
    draw represents is unchanged.
    """
    k = _mixture_layout(chain)
    draws = chain.draws.copy()
    for i in range(draws.shape[0]):
        w = draws[i, :k]
        m = draws[i, k:2 * k]
        order = np.lexsort((m, -w))
        draws[i, :k] = w[order]
        draws[i, k:2 * k] = m[order]
        draws[i, 2 * k:] = draws[i, 2 * k:][order]
    return replace(chain, draws=draws)


def relabel_by_mean(chain: Chain) -> Chain:
    """Sort components of every draw by mean, ascending (ties by weight
    descending).  Used when true weights are equal and weight ordering
    would scramble component identity."""
    k = _mixture_layout(chain)
    draws = chain.draws.copy()
    for i in range(draws.shape[0]):
        w = draws[i, :k]
        m = draws[i, k:2 * k]
        order = np.lexsort((-w, m))
        draws[i, :k] = w[order]
        draws[i, k:2 * k] = m[order]
        draws[i, 2 * k:] = draws[i, 2 * k:][order]
    return replace(chain, draws=draws)


# ---------------------------------------------------------------------------
# blocked sampler for the hierarchical model
# ---------------------------------------------------------------------------

def school_effect_conditional(data: EightSchoolsData, mu: float,
                              sigma_alpha2: float):
    """Mean and sd vectors of the Gaussian full conditional of each effect."""
    prec = 1.0 / data.s ** 2 + 1.0 / sigma_alpha2
    mean = (data.y - mu) / data.s ** 2 / prec
    return mean, 1.0 / np.sqrt(prec)


def grand_mean_conditional(data: EightSchoolsData, alpha: np.ndarray):
    """Mean and sd of the Gaussian full conditional of the grand mean
    under a flat prior."""
    w = 1.0 / data.s ** 2
    prec = float(w.sum())
    mean = float(np.sum(w * (data.y - alpha)) / prec)
    return mean, 1.0 / math.sqrt(prec)


def hierarchical_sampler(data: EightSchoolsData,
                         variance_prior, cfg: McmcConfig) -> Chain:
    """Blocked sweep: effects and the grand mean from exact Gaussian full
    conditionals; the between-group variance either by a conjugate
    inverse-gamma draw or by random-walk MH on its log, depending on the
    prior supplied.
    """
    if isinstance(variance_prior, ComparatorPrior):
        if variance_prior.kind != "inverse_gamma":
            raise ConfigError(
                "only the inverse_gamma comparator is supported on the variance"
            )
        conjugate = True
    elif isinstance(variance_prior, ScorePriorPositive):
        conjugate = False
    else:
        raise ConfigError(
            "variance_prior must be ComparatorPrior('inverse_gamma', ...) "
            "or ScorePriorPositive"
        )
    rng = chain_rng(cfg.seed)
    J = data.n_groups
    mu = float(data.y.mean())
    alpha = (data.y - mu) / 2.0
    v = float(np.mean(alpha ** 2)) + 1.0
    ls_v = math.log(cfg.scale_for("sigma_alpha2"))
    acc_v = 0
    n_post = cfg.n_iter - cfg.burn_in
    kept = np.empty((cfg.n_kept, J + 2))
    ki = 0

    def v_log_target(vv: float, rss: float) -> float:
        # likelihood of the effects plus prior, as a function of the variance
        return (-0.5 * J * math.log(vv) - rss / (2.0 * vv)
                + math.log(variance_prior.a) - 2.0 * math.log(variance_prior.a + vv))

    lv = math.log(v)
    for t in range(cfg.n_iter):
        mean_a, sd_a = school_effect_conditional(data, mu, v)
        alpha = mean_a + sd_a * rng.standard_normal(J)
        mean_m, sd_m = grand_mean_conditional(data, alpha)
        mu = mean_m + sd_m * rng.standard_normal()
        rss = float(np.sum(alpha ** 2))
        if conjugate:
            shape = variance_prior.shape + 0.5 * J
            rate = variance_prior.rate + 0.5 * rss
            v = rate / rng.gamma(shape)
            lv = math.log(v)
            ok = True
        else:
            prop_lv = lv + math.exp(ls_v) * rng.standard_normal()
            prop_v = math.exp(prop_lv)
            # Jacobian of v -> log v cancels into the +log v terms
            ratio = (v_log_target(prop_v, rss) + prop_lv
                     - v_log_target(v, rss) - lv)
            ok = math.log(rng.random()) < ratio
            if ok:
                v, lv = prop_v, prop_lv
            if t < cfg.burn_in and cfg.adapt:
                ls_v += ((1.0 if ok else 0.0) - _RM_TARGET) / (t + 1) ** _RM_DECAY
        if t >= cfg.burn_in:
            acc_v += ok
            if (t - cfg.burn_in + 1) % cfg.thin == 0:
                kept[ki, 0] = mu
                kept[ki, 1:1 + J] = alpha
                kept[ki, 1 + J] = v
                ki += 1

    names = tuple(["mu"] + [f"alpha_{j + 1}" for j in range(J)]
                  + ["sigma_alpha2"])
    return Chain(draws=kept, names=names,
                 acceptance={"sigma_alpha2": acc_v / n_post}, config=cfg,
                 tuned={"sigma_alpha2": math.exp(ls_v)})
