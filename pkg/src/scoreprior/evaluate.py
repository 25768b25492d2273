"""Frequentist evaluation over replicated runs, and DIC model selection.

Replication studies bind replicate r to seed base_seed + r.  Data for a
replicate depends only on that seed (not on the true parameter value), so
the same noise realizations are shared across every row of a results
table; differences between rows then reflect the parameter, not fresh
sampling noise.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DevianceError, DomainError, ScorepriorError
from .mcmc import (
    Chain,
    McmcConfig,
    MixturePriors,
    data_rng,
    hierarchical_sampler,
    mwg_mixture,
    relabel_by_mean,
    relabel_by_weight,
    rw_metropolis,
)
from .models import (
    REPEAT_MIXTURES,
    SINGLE_SAMPLE_MIXTURE,
    EightSchoolsData,
    LogNormalLocationModel,
    MixtureModel,
    NormalScaleModel,
    loglik_mixture,
    sample_mixture,
)
from .priors import ComparatorPrior, ScorePriorPositive

__all__ = [
    "normalized_rmse",
    "mse",
    "coverage95",
    "dic",
    "mixture_loglik_fn",
    "ReplicationPlan",
    "ExperimentReport",
    "run_replication",
    "SingleSampleResult",
    "mixture_single_run",
    "RepeatCell",
    "MixtureRepeatResult",
    "mixture_repeat_study",
    "GalaxyDicResult",
    "galaxy_dic_study",
    "SchoolsResult",
    "schools_study",
    "format_float",
    "write_csv",
]

SCALAR_FAMILIES = ("normal_scale", "lognormal_location")
SCALAR_PRIORS = ("score", "jeffreys", "flat")


def format_float(v) -> str:
    """Shortest round-trip decimal form; reruns produce identical bytes."""
    return repr(float(v))


def write_csv(path, header: Sequence[str], rows) -> None:
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(
                format_float(v) if isinstance(v, float) else str(v)
                for v in row) + "\n")


# ---------------------------------------------------------------------------
# summary statistics
# ---------------------------------------------------------------------------

def normalized_rmse(estimates, truth: float) -> float:
    """Root mean squared error of the estimates divided by |truth|.

    A truth of exactly 0 has no scale to normalize by; the raw RMSE is
    returned instead, with a warning.
    """
    est = np.asarray(estimates, dtype=float)
    if est.size == 0:
        raise DomainError("no estimates supplied")
    rmse = math.sqrt(float(np.mean((est - truth) ** 2)))
    if truth == 0:
        warnings.warn("truth is 0; returning the unnormalized RMSE",
                      RuntimeWarning, stacklevel=2)
        return rmse
    return rmse / abs(truth)


def mse(estimates, truth: float) -> float:
    """Plain mean squared error (no root, no normalization)."""
    est = np.asarray(estimates, dtype=float)
    if est.size == 0:
        raise DomainError("no estimates supplied")
    return float(np.mean((est - truth) ** 2))


def coverage95(intervals, truth: float) -> float:
    """Fraction of (lo, hi) intervals containing the truth."""
    iv = np.asarray(intervals, dtype=float)
    if iv.size == 0:
        raise DomainError("no intervals supplied")
    iv = iv.reshape(-1, 2)
    if np.any(iv[:, 0] > iv[:, 1]):
        raise DomainError("every interval needs lo <= hi")
    return float(np.mean((iv[:, 0] <= truth) & (truth <= iv[:, 1])))


def dic(chain: Chain, loglik_fn: Callable, data) -> float:
    """Deviance information criterion with the posterior-mean plug-in.

    DIC = Dbar + pD = 2 Dbar - D(theta_bar), D = -2 log-likelihood.
    Mixture chains should be relabeled before calling, or theta_bar is an
    average across switched labels.
    """
    if chain.n_kept == 0:
        raise DomainError("empty chain")
    devs = np.empty(chain.n_kept)
    for i, row in enumerate(chain.draws):
        d = -2.0 * loglik_fn(data, row)
        if not math.isfinite(d):
            raise DevianceError(f"non-finite deviance at draw {i}: {d}")
        devs[i] = d
    d_bar = float(devs.mean())
    d_hat = -2.0 * loglik_fn(data, chain.mean())
    if not math.isfinite(d_hat):
        raise DevianceError("non-finite deviance at the posterior mean")
    return 2.0 * d_bar - d_hat


def mixture_loglik_fn(k: int) -> Callable:
    """Adapter from a mixture chain row (omega, mu, sigma blocks) to the
    mixture log-likelihood, for use with dic()."""
    def fn(data, row):
        return loglik_mixture(
            MixtureModel(row[:k], row[k:2 * k], row[2 * k:]), data)
    return fn


# ---------------------------------------------------------------------------
# scalar-parameter replication studies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReplicationPlan:
    family: str
    prior: str
    truth: float
    M: int = 250
    n: int = 100
    base_seed: int = 0
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    prior_scale: float = 1.0  # the a of the score prior

    def __post_init__(self):
        if self.family not in SCALAR_FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if self.prior not in SCALAR_PRIORS:
            raise ConfigError(f"unknown prior {self.prior!r}")
        if self.family == "normal_scale" and self.prior == "flat":
            raise ConfigError("the scale study compares score vs jeffreys")
        if self.family == "lognormal_location" and self.prior == "jeffreys":
            # the location comparator is the flat prior; tables label it
            # "Jeffreys", so accept either name
            object.__setattr__(self, "prior", "flat")
        if self.M < 1:
            raise ConfigError("M must be >= 1")
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if self.family == "normal_scale" and self.truth <= 0:
            raise ConfigError("a scale truth must be positive")


@dataclass(frozen=True)
class ExperimentReport:
    plan: ReplicationPlan
    estimates: np.ndarray
    lo95: np.ndarray
    hi95: np.ndarray
    failed: np.ndarray
    acceptance_ok: np.ndarray

    def _good(self):
        return ~self.failed

    @property
    def n_failed(self) -> int:
        return int(self.failed.sum())

    @property
    def normalized_rmse(self) -> float:
        return normalized_rmse(self.estimates[self._good()], self.plan.truth)

    @property
    def mse(self) -> float:
        return mse(self.estimates[self._good()], self.plan.truth)

    @property
    def coverage(self) -> float:
        g = self._good()
        return coverage95(np.column_stack([self.lo95[g], self.hi95[g]]),
                          self.plan.truth)

    def contains_truth(self) -> np.ndarray:
        return (self.lo95 <= self.plan.truth) & (self.plan.truth <= self.hi95)

    def summary(self) -> dict:
        return {
            "family": self.plan.family,
            "prior": self.plan.prior,
            "truth": self.plan.truth,
            "M": self.plan.M,
            "n": self.plan.n,
            "normalized_rmse": self.normalized_rmse,
            "mse": self.mse,
            "coverage": self.coverage,
            "n_failed": self.n_failed,
            "acceptance_flagged": int((~self.acceptance_ok).sum()),
        }

    def to_csv(self, path) -> None:
        inside = self.contains_truth()
        rows = []
        for r in range(self.plan.M):
            if self.failed[r]:
                rows.append((r + 1, "", "", "", "failed"))
            else:
                rows.append((r + 1, float(self.estimates[r]),
                             float(self.lo95[r]), float(self.hi95[r]),
                             int(inside[r])))
        write_csv(path, ("replicate", "estimate", "lo95", "hi95",
                         "contains_truth"), rows)


def _scalar_log_post(plan: ReplicationPlan, data: np.ndarray):
    """Posterior kernel, initial point, and transform flag for one replicate."""
    a = plan.prior_scale
    if plan.family == "normal_scale":
        model = NormalScaleModel(data)
        if plan.prior == "score":
            def log_post(s, _ll=model.loglik):
                return _ll(s) - 2.0 * math.log(a + s)
        else:  # jeffreys
            def log_post(s, _ll=model.loglik):
                return _ll(s) - math.log(s)
        return log_post, model.mle(), True, "sigma"
    model = LogNormalLocationModel(data)
    if plan.prior == "score":
        def log_post(m, _ll=model.loglik):
            return _ll(m) - 2.0 * math.log(abs(m) + a)
    else:  # flat
        log_post = model.loglik
    return log_post, model.mle(), False, "mu"


def _replicate_data(plan: ReplicationPlan, seed: int) -> np.ndarray:
    z = data_rng(seed).standard_normal(plan.n)
    if plan.family == "normal_scale":
        return plan.truth * z
    return np.exp(plan.truth + z)  # lognormal with known unit log-scale


def run_replication(plan: ReplicationPlan) -> ExperimentReport:
    """Posterior mean and 95% interval for every replicate, aggregated."""
    M = plan.M
    est = np.full(M, np.nan)
    lo = np.full(M, np.nan)
    hi = np.full(M, np.nan)
    failed = np.zeros(M, dtype=bool)
    acc_ok = np.ones(M, dtype=bool)
    for r in range(1, M + 1):
        seed = plan.base_seed + r
        try:
            data = _replicate_data(plan, seed)
            log_post, init, positive, name = _scalar_log_post(plan, data)
            cfg = replace(plan.mcmc, seed=seed)
            chain = rw_metropolis(log_post, init, cfg, log_scale=positive,
                                  name=name)
            col = chain.column(name)
            est[r - 1] = col.mean()
            lo[r - 1], hi[r - 1] = chain.interval95(name)
            acc_ok[r - 1] = chain.acceptance_in()
        except (ScorepriorError, FloatingPointError, OverflowError):
            failed[r - 1] = True
    return ExperimentReport(plan=plan, estimates=est, lo95=lo, hi95=hi,
                            failed=failed, acceptance_ok=acc_ok)


# ---------------------------------------------------------------------------
# mixture studies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SingleSampleResult:
    chain: Chain              # relabeled, weight-descending
    truth: np.ndarray         # same layout as the chain columns
    post_mean: np.ndarray
    lo95: np.ndarray
    hi95: np.ndarray
    inside: np.ndarray

    @property
    def all_inside(self) -> bool:
        return bool(self.inside.all())

    def rows(self):
        out = []
        for name, tv, pm, a, b, ok in zip(self.chain.names, self.truth,
                                          self.post_mean, self.lo95,
                                          self.hi95, self.inside):
            out.append((name, float(tv), float(pm), float(a), float(b),
                        int(ok)))
        return out


def mixture_single_run(seed: int, cfg: McmcConfig, n: int = 200,
                       model: MixtureModel = SINGLE_SAMPLE_MIXTURE,
                       priors: MixturePriors | None = None,
                       data_seed: int | None = None) -> SingleSampleResult:
    """One seeded draw from the three-component benchmark, fitted and
    summarized with components in weight-descending order.

    data_seed pins the sample independently of the chain seed, so sampler
    stability can be assessed on a fixed realization; default ties both
    to `seed`.
    """
    y = sample_mixture(model, n, data_rng(seed if data_seed is None
                                          else data_seed))
    chain = mwg_mixture(y, model.k, priors or MixturePriors(),
                        replace(cfg, seed=seed))
    rl = relabel_by_weight(chain)
    k = model.k
    order = np.lexsort((model.means, -model.weights))
    truth = np.concatenate([model.weights[order], model.means[order],
                            model.sds[order]])
    post_mean = rl.mean()
    lo, hi = rl.quantiles([0.025, 0.975])
    inside = (lo <= truth) & (truth <= hi)
    return SingleSampleResult(chain=rl, truth=truth, post_mean=post_mean,
                              lo95=lo, hi95=hi, inside=inside)


@dataclass(frozen=True)
class RepeatCell:
    k: int
    component: int  # 1-based, means ascending
    n: int
    true_mean: float
    iqr_mean: float     # IQR across replicates of the posterior mean of mu_l
    iqr_sd: float       # same for sigma_l


@dataclass(frozen=True)
class MixtureRepeatResult:
    cells: list[RepeatCell]
    M: int

    def monotone_fraction(self) -> float:
        """Fraction of (k, component) cells whose mu-IQR strictly shrinks
        as n grows."""
        by_kl: dict[tuple[int, int], dict[int, float]] = {}
        for c in self.cells:
            by_kl.setdefault((c.k, c.component), {})[c.n] = c.iqr_mean
        ok = 0
        for seq in by_kl.values():
            ns = sorted(seq)
            vals = [seq[n] for n in ns]
            ok += all(a > b for a, b in zip(vals, vals[1:]))
        return ok / len(by_kl)

    def rows(self):
        return [(c.k, c.component, c.n, c.true_mean, c.iqr_mean, c.iqr_sd)
                for c in self.cells]


def _cell_seed(base_seed: int, k: int, n: int, r: int) -> int:
    # disjoint, deterministic seed blocks per grid cell
    return base_seed + 1_000_000 * k + 1_000 * n + r


def _align_to_means(draws: np.ndarray, k: int,
                    target_means: np.ndarray) -> np.ndarray:
    """Per-draw component permutation minimizing squared distance of the
    mean block to target_means; breaks the label ambiguity that ordering
    conventions cannot resolve when components overlap."""
    perms = np.array(list(itertools.permutations(range(k))))
    mus = draws[:, k:2 * k]
    costs = ((mus[:, perms] - target_means[None, None, :]) ** 2).sum(axis=2)
    best = perms[np.argmin(costs, axis=1)]          # (ndraws, k)
    rows = np.arange(draws.shape[0])[:, None]
    out = np.empty_like(draws)
    for b, block in enumerate((0, k, 2 * k)):
        out[:, block:block + k] = draws[:, block:block + k][rows, best]
    return out


def mixture_repeat_study(base_seed: int, cfg: McmcConfig, M: int = 20,
                         ns: Sequence[int] = (50, 100, 200),
                         ks: Sequence[int] = (3, 4, 5)) -> MixtureRepeatResult:
    """Repeated-sampling dispersion of posterior means over an (k, n) grid.

    Components are tracked by per-draw least-squares matching of the
    sampled means to the true means; the equal design weights make weight
    ordering uninformative, and adjacent true means are close enough that
    mean ordering misassigns crossing draws.

    Replicate r draws one sample of size max(ns) per k and fits nested
    prefixes of it, so dispersion comparisons across n share the data
    randomness (common random numbers).
    """
    cells = []
    n_max = max(ns)
    for k in ks:
        model = REPEAT_MIXTURES[k]
        target = np.sort(model.means)
        full = {r: sample_mixture(model, n_max,
                                  data_rng(_cell_seed(base_seed, k, 0, r)))
                for r in range(1, M + 1)}
        for n in ns:
            pm_mu = np.empty((M, k))
            pm_sd = np.empty((M, k))
            for r in range(1, M + 1):
                seed = _cell_seed(base_seed, k, n, r)
                y = full[r][:n]
                chain = mwg_mixture(y, k, MixturePriors(),
                                    replace(cfg, seed=seed))
                aligned = _align_to_means(chain.draws, k, target)
                pm_mu[r - 1] = aligned[:, k:2 * k].mean(axis=0)
                pm_sd[r - 1] = aligned[:, 2 * k:].mean(axis=0)
            q75m, q25m = np.quantile(pm_mu, [0.75, 0.25], axis=0)
            q75s, q25s = np.quantile(pm_sd, [0.75, 0.25], axis=0)
            for l in range(k):
                cells.append(RepeatCell(
                    k=k, component=l + 1, n=n,
                    true_mean=float(np.sort(model.means)[l]),
                    iqr_mean=float(q75m[l] - q25m[l]),
                    iqr_sd=float(q75s[l] - q25s[l])))
    return MixtureRepeatResult(cells=cells, M=M)


@dataclass(frozen=True)
class GalaxyDicResult:
    ks: tuple[int, ...]
    seeds: tuple[int, ...]
    table: np.ndarray  # (len(seeds), len(ks)) of DIC values
    sha256: str

    def argmin_k(self, seed_index: int) -> int:
        return int(self.ks[int(np.argmin(self.table[seed_index]))])

    def argmin_counts(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for i in range(len(self.seeds)):
            kk = self.argmin_k(i)
            out[kk] = out.get(kk, 0) + 1
        return out

    def dic_for(self, seed_index: int, k: int) -> float:
        return float(self.table[seed_index, self.ks.index(k)])

    def rows(self):
        out = []
        for i, s in enumerate(self.seeds):
            for j, k in enumerate(self.ks):
                out.append((s, k, float(self.table[i, j])))
        return out


def galaxy_dic_study(values: np.ndarray, seeds: Sequence[int],
                     cfg: McmcConfig, ks: Sequence[int] = tuple(range(2, 9)),
                     sha256: str = "") -> GalaxyDicResult:
    """DIC across component counts, repeated over seeds."""
    ks = tuple(int(k) for k in ks)
    seeds = tuple(int(s) for s in seeds)
    table = np.empty((len(seeds), len(ks)))
    for i, seed in enumerate(seeds):
        for j, k in enumerate(ks):
            chain = mwg_mixture(values, k, MixturePriors(),
                                replace(cfg, seed=seed + k))
            # mean-ascending labels: component weights of the small velocity
            # clumps cross between draws, so weight ordering scrambles the
            # plug-in average and drives p_D negative
            table[i, j] = dic(relabel_by_mean(chain), mixture_loglik_fn(k),
                              values)
    return GalaxyDicResult(ks=ks, seeds=seeds, table=table, sha256=sha256)


# ---------------------------------------------------------------------------
# hierarchical study
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SchoolsResult:
    prior: str
    mean: float
    lo95: float
    hi95: float
    median: float
    chain: Chain


def schools_study(seed: int, prior: str, cfg: McmcConfig,
                  data: EightSchoolsData | None = None) -> SchoolsResult:
    """Marginal posterior of the between-school variance under one prior."""
    data = data or EightSchoolsData()
    if prior == "score":
        vp = ScorePriorPositive(1.0)
    elif prior == "inverse_gamma":
        vp = ComparatorPrior("inverse_gamma", shape=1.0, rate=1.0)
    else:
        raise ConfigError(f"prior must be 'score' or 'inverse_gamma', got {prior!r}")
    chain = hierarchical_sampler(data, vp, replace(cfg, seed=seed))
    col = chain.column("sigma_alpha2")
    return SchoolsResult(
        prior=prior,
        mean=float(col.mean()),
        lo95=float(np.quantile(col, 0.025)),
        hi95=float(np.quantile(col, 0.975)),
        median=float(np.quantile(col, 0.5)),
        chain=chain,
    )
