"""Data generators and the seeded Monte Carlo harness.

Replicate r of a run with master seed s draws from a counter-based stream
keyed by (s, r), so results are independent of execution order and a run
split into two half-runs merges exactly to the unsplit result.  All scalar
accumulators use integer or rational arithmetic so merging is exact.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats as spstats

from .core import (
    AssumptionError,
    Density,
    DiscreteUniformGrid,
    GaussianLocation,
    GroundTruth,
    PiecewiseConstant,
    Scale,
    StatVector,
    StudentT,
    TwoGroupsSpec,
    Uniform01,
)
from .density import grenander_fit
from .lfdr import storey_pi0
from .procedures import (
    RejectionResult,
    bh_threshold,
    perturb_grid_pvalues,
    q_values,
    support_line,
)

_SEED_MASK = (1 << 64) - 1


def replicate_rng(master_seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for one replicate, keyed by (seed, index)."""
    key = np.array([master_seed & _SEED_MASK, index & _SEED_MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


# ---------------------------------------------------------------------------
# Generator specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianMeans:
    """z_i ~ N(mu, 1) for i < m1 and N(0, 1) otherwise; z-scale output."""

    m: int
    m1: int
    mu: float

    def __post_init__(self):
        if self.m < 1 or not 0 <= self.m1 <= self.m:
            raise ValueError("need m >= 1 and 0 <= m1 <= m")


@dataclass(frozen=True)
class TwoGroupsBeta:
    """round(pi0*m) uniform null p-values, the rest i.i.d. Beta(a, b)."""

    m: int
    pi0: float
    a: float
    b: float

    def __post_init__(self):
        if self.m < 1 or not 0.0 <= self.pi0 <= 1.0 or self.a <= 0 or self.b <= 0:
            raise ValueError("invalid two-groups beta parameters")

    @property
    def m0(self) -> int:
        return int(round(self.pi0 * self.m))


@dataclass(frozen=True)
class DiscreteUniformNulls:
    """Nulls uniform on {1/L..L/L}; alternatives fixed at alt_positions/L."""

    m: int
    L: int
    alt_positions: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.m < 1 or self.L < 1 or len(self.alt_positions) > self.m:
            raise ValueError("invalid discrete grid parameters")
        pos = tuple(int(k) for k in self.alt_positions)
        if pos and (min(pos) < 1 or max(pos) > self.L):
            raise ValueError("alt_positions must lie in 1..L")
        object.__setattr__(self, "alt_positions", pos)


@dataclass(frozen=True)
class SuperUniformCE:
    """Two hypotheses: a super-uniform (not uniform) null and a point-mass
    alternative at 1/4.  The null density is 1/2 on [0,1/4], 3/2 on (1/4,1/2],
    and 1 above."""


@dataclass(frozen=True)
class DiscreteCE:
    """Six hypotheses on the 1/9 grid: five alternatives fixed at
    {1,1,2,3,4}/9 and one null uniform on the grid."""


@dataclass(frozen=True)
class OmegaSpec:
    """Precision matrix pattern: 'identity' or 'chain' (tridiagonal, rho)."""

    kind: str = "identity"
    rho: float = 0.0

    def matrix(self, d: int) -> np.ndarray:
        if self.kind == "identity":
            return np.eye(d)
        if self.kind == "chain":
            if not abs(self.rho) < 0.5:
                raise ValueError("chain precision needs |rho| < 0.5 for definiteness")
            omega = np.eye(d)
            idx = np.arange(d - 1)
            omega[idx, idx + 1] = self.rho
            omega[idx + 1, idx] = self.rho
            return omega
        raise ValueError(f"unknown precision pattern {self.kind!r}")


@dataclass(frozen=True)
class GGM:
    """Partial-correlation testing: one t statistic per unordered pair.

    n i.i.d. draws of N(0, Omega^{-1}); the statistic for pair {i, j}, i < j,
    is the standardized coefficient of X_i when X_j is regressed on all other
    coordinates (with intercept), on n - d degrees of freedom.  The pair is
    null iff Omega_ij = 0.
    """

    d: int
    n: int
    omega: OmegaSpec = field(default_factory=OmegaSpec)

    def __post_init__(self):
        if not 2 <= self.d < self.n:
            raise ValueError("need 2 <= d < n")


GeneratorSpec = Union[GaussianMeans, TwoGroupsBeta, DiscreteUniformNulls,
                      SuperUniformCE, DiscreteCE, GGM]

_SUPERUNIFORM_NULL = PiecewiseConstant((0.0, 0.25, 0.5, 1.0), (0.5, 1.5, 1.0))
_DISCRETE_CE_ALTS = (1, 1, 2, 3, 4)
_DISCRETE_CE_L = 9


def generate(spec: GeneratorSpec, seed: Optional[int] = None,
             rng: Optional[np.random.Generator] = None) -> Tuple[StatVector, GroundTruth]:
    """Draw one replicate; deterministic given the seed (or supplied rng)."""
    if rng is None:
        rng = replicate_rng(0 if seed is None else seed, 0)

    if isinstance(spec, GaussianMeans):
        z = rng.normal(0.0, 1.0, spec.m)
        z[:spec.m1] += spec.mu
        flags = np.ones(spec.m, dtype=bool)
        flags[:spec.m1] = False
        return StatVector(z, Scale.Z_VALUE), GroundTruth(flags)

    if isinstance(spec, TwoGroupsBeta):
        m0 = spec.m0
        m1 = spec.m - m0
        p = np.empty(spec.m)
        p[:m1] = rng.beta(spec.a, spec.b, m1)
        p[m1:] = rng.random(m0)
        flags = np.ones(spec.m, dtype=bool)
        flags[:m1] = False
        return StatVector(p, Scale.P_VALUE), GroundTruth(flags)

    if isinstance(spec, DiscreteUniformNulls):
        m1 = len(spec.alt_positions)
        m0 = spec.m - m1
        p = np.empty(spec.m)
        p[:m1] = np.asarray(spec.alt_positions, dtype=float) / spec.L
        p[m1:] = rng.integers(1, spec.L + 1, size=m0) / spec.L
        flags = np.ones(spec.m, dtype=bool)
        flags[:m1] = False
        return StatVector(p, Scale.P_VALUE), GroundTruth(flags)

    if isinstance(spec, SuperUniformCE):
        p1 = float(_SUPERUNIFORM_NULL.sample(rng, 1)[0])
        p = np.array([p1, 0.25])
        return (StatVector(p, Scale.P_VALUE),
                GroundTruth(np.array([True, False])))

    if isinstance(spec, DiscreteCE):
        p6 = rng.integers(1, _DISCRETE_CE_L + 1) / _DISCRETE_CE_L
        p = np.array([k / _DISCRETE_CE_L for k in _DISCRETE_CE_ALTS] + [p6])
        flags = np.array([False] * 5 + [True])
        return StatVector(p, Scale.P_VALUE), GroundTruth(flags)

    if isinstance(spec, GGM):
        return _generate_ggm(spec, rng)

    raise ValueError(f"unknown generator spec {spec!r}")


def _generate_ggm(spec: GGM, rng: np.random.Generator) -> Tuple[StatVector, GroundTruth]:
    d, n = spec.d, spec.n
    omega = spec.omega.matrix(d)
    sigma = np.linalg.inv(omega)
    chol = np.linalg.cholesky(sigma)
    x = rng.normal(size=(n, d)) @ chol.T

    # one regression per response column, with intercept: dof = n - d
    tstats = np.empty((d, d))
    ones = np.ones((n, 1))
    for j in range(d):
        others = np.delete(np.arange(d), j)
        design = np.concatenate([ones, x[:, others]], axis=1)
        gram = design.T @ design
        gram_inv = np.linalg.inv(gram)
        coef = gram_inv @ (design.T @ x[:, j])
        resid = x[:, j] - design @ coef
        dof = n - d
        sigma2 = float(resid @ resid) / dof
        se = np.sqrt(sigma2 * np.diag(gram_inv))
        tstats[j, others] = coef[1:] / se[1:]

    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    values = np.array([tstats[j, i] for i, j in pairs])
    flags = np.array([omega[i, j] == 0.0 for i, j in pairs])
    ids = tuple(f"{i}-{j}" for i, j in pairs)
    return StatVector(values, Scale.Z_VALUE, ids=ids), GroundTruth(flags)


def null_density(spec: GeneratorSpec) -> Density:
    """The shared null density of a generator's statistics."""
    if isinstance(spec, GaussianMeans):
        return GaussianLocation(0.0)
    if isinstance(spec, (TwoGroupsBeta,)):
        return Uniform01()
    if isinstance(spec, (DiscreteUniformNulls, DiscreteCE)):
        L = spec.L if isinstance(spec, DiscreteUniformNulls) else _DISCRETE_CE_L
        return DiscreteUniformGrid(L)
    if isinstance(spec, SuperUniformCE):
        return _SUPERUNIFORM_NULL
    if isinstance(spec, GGM):
        return StudentT(spec.n - spec.d)
    raise ValueError(f"unknown generator spec {spec!r}")


def oracle_score_fn(spec: GeneratorSpec):
    """Closed-form pointwise score function for designs that admit one."""
    if isinstance(spec, GaussianMeans):
        pi0 = (spec.m - spec.m1) / spec.m

        def score(z):
            f0 = spstats.norm.pdf(z)
            f1 = spstats.norm.pdf(z, loc=spec.mu)
            return pi0 * f0 / (pi0 * f0 + (1.0 - pi0) * f1)
        return score
    if isinstance(spec, TwoGroupsBeta):
        pi0 = spec.m0 / spec.m

        def score(p):
            f1 = spstats.beta.pdf(p, spec.a, spec.b)
            out = pi0 / (pi0 + (1.0 - pi0) * f1)
            return np.where(np.isposinf(f1), 0.0, out)
        return score
    raise AssumptionError(f"no closed-form pointwise score for {type(spec).__name__}")


# ---------------------------------------------------------------------------
# Procedures and error criteria
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProcedureConfig:
    """Which procedure the harness runs, and the optional grid perturbation."""

    kind: str  # "support-line" | "bh" | "storey-bh"
    alpha: float
    storey_lambda: float = 0.5
    perturb: bool = False
    grid_L: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("support-line", "bh", "storey-bh"):
            raise ValueError(f"unknown procedure {self.kind!r}")
        if self.perturb and self.grid_L is None:
            raise ValueError("perturbation requires grid_L")


def run_procedure(data: StatVector, cfg: ProcedureConfig) -> RejectionResult:
    if cfg.kind == "support-line":
        return support_line(data, cfg.alpha)
    if cfg.kind == "bh":
        return bh_threshold(data, cfg.alpha)
    pi0 = storey_pi0(data, cfg.storey_lambda)
    return bh_threshold(data, cfg.alpha, m0_hat=pi0.value * data.m)


@dataclass(frozen=True)
class Fdr:
    name: str = "FDR"


@dataclass(frozen=True)
class Bfdr:
    name: str = "bFDR"


@dataclass(frozen=True)
class Power:
    name: str = "power"


@dataclass(frozen=True)
class MfdrInterval:
    s: float
    t: float

    @property
    def name(self) -> str:
        return f"mFDR[{self.s},{self.t}]"


@dataclass(frozen=True)
class PfdrInterval:
    s: float
    t: float

    @property
    def name(self) -> str:
        return f"pFDR[{self.s},{self.t}]"


Criterion = Union[Fdr, Bfdr, Power, MfdrInterval, PfdrInterval]


class _MeanAccumulator:
    """Exact sum / sum-of-squares of rational per-replicate values."""

    __slots__ = ("total", "sum", "sumsq", "n")

    def __init__(self):
        self.total = 0   # replicates seen, including ones contributing nothing
        self.sum = Fraction(0)
        self.sumsq = Fraction(0)
        self.n = 0       # replicates that contributed a value

    def add(self, value: Optional[Fraction]):
        self.total += 1
        if value is not None:
            self.sum += value
            self.sumsq += value * value
            self.n += 1

    def merge(self, other: "_MeanAccumulator"):
        self.total += other.total
        self.sum += other.sum
        self.sumsq += other.sumsq
        self.n += other.n

    def estimate(self) -> Optional[Dict[str, float]]:
        if self.n == 0:
            return None
        mean = self.sum / self.n
        out = {"mean": float(mean), "n": self.n}
        if self.n > 1:
            var = (self.sumsq - self.sum * mean) / (self.n - 1)
            out["std_error"] = math.sqrt(max(0.0, float(var)) / self.n)
        else:
            out["std_error"] = math.nan
        return out


class _RatioAccumulator:
    """Exact integer moments for a ratio-of-means estimate."""

    __slots__ = ("sv", "sr", "svv", "srr", "svr", "n")

    def __init__(self):
        self.sv = self.sr = self.svv = self.srr = self.svr = self.n = 0

    def add(self, v: int, r: int):
        self.sv += v
        self.sr += r
        self.svv += v * v
        self.srr += r * r
        self.svr += v * r
        self.n += 1

    def merge(self, other: "_RatioAccumulator"):
        self.sv += other.sv
        self.sr += other.sr
        self.svv += other.svv
        self.srr += other.srr
        self.svr += other.svr
        self.n += other.n

    def estimate(self) -> Optional[Dict[str, float]]:
        if self.n == 0 or self.sr == 0:
            return None
        theta = Fraction(self.sv, self.sr)
        out = {"mean": float(theta), "n": self.n}
        if self.n > 1:
            n = self.n
            svv = Fraction(self.svv) - Fraction(self.sv * self.sv, n)
            srr = Fraction(self.srr) - Fraction(self.sr * self.sr, n)
            svr = Fraction(self.svr) - Fraction(self.sv * self.sr, n)
            quad = (svv - 2 * theta * svr + theta * theta * srr) / (n - 1)
            rbar = Fraction(self.sr, n)
            var = float(quad) / (n * float(rbar) ** 2)
            out["std_error"] = math.sqrt(max(0.0, var))
        else:
            out["std_error"] = math.nan
        return out


def _new_accumulator(criterion: Criterion):
    return _RatioAccumulator() if isinstance(criterion, MfdrInterval) else _MeanAccumulator()


@dataclass
class MonteCarloReport:
    """Aggregated criterion estimates with exact, mergeable accumulators."""

    n_replicates: int
    estimates: Dict[str, Dict[str, float]]
    config: Dict[str, str]
    accumulators: Dict[str, object]

    def to_jsonable(self) -> Dict:
        return {
            "config": self.config,
            "estimates": self.estimates,
            "replicates": self.n_replicates,
        }


def _config_echo(spec, procedure, criteria, seed) -> Dict[str, str]:
    return {
        "generator": repr(spec),
        "procedure": repr(procedure),
        "criteria": [c.name for c in criteria],
        "seed": int(seed),
    }


def _run_chunk(spec, procedure, criteria, seed, indices) -> Dict[str, object]:
    accs = {c.name: _new_accumulator(c) for c in criteria}
    needs_result = any(isinstance(c, (Fdr, Bfdr, Power)) for c in criteria)
    for idx in indices:
        rng = replicate_rng(seed, idx)
        data, truth = generate(spec, rng=rng)
        if procedure.perturb:
            data = perturb_grid_pvalues(data, procedure.grid_L, rng)
        flags = truth.null_flags
        if needs_result:
            result = run_procedure(data, procedure)
            rej = result.rejected
            r = result.n_rejections
            v = int(np.count_nonzero(flags[rej])) if r else 0
        for crit in criteria:
            acc = accs[crit.name]
            if isinstance(crit, Fdr):
                acc.add(Fraction(v, max(1, r)))
            elif isinstance(crit, Bfdr):
                if r == 0:
                    acc.add(Fraction(0))
                else:
                    ties = np.flatnonzero(data.values == result.boundary_stat)
                    pick = ties[rng.integers(ties.size)] if ties.size > 1 else ties[0]
                    acc.add(Fraction(1 if flags[pick] else 0))
            elif isinstance(crit, Power):
                m1 = truth.m - truth.m0
                if m1 == 0:
                    acc.add(None)
                else:
                    tp = r - v
                    acc.add(Fraction(tp, m1))
            elif isinstance(crit, MfdrInterval):
                inside = (data.values >= crit.s) & (data.values <= crit.t)
                acc.add(int(np.count_nonzero(inside & flags)),
                        int(np.count_nonzero(inside)))
            elif isinstance(crit, PfdrInterval):
                inside = (data.values >= crit.s) & (data.values <= crit.t)
                rr = int(np.count_nonzero(inside))
                if rr == 0:
                    acc.add(None)
                else:
                    vv = int(np.count_nonzero(inside & flags))
                    acc.add(Fraction(vv, rr))
    return accs


def mc_error_rates(spec: GeneratorSpec, procedure: ProcedureConfig, n_reps: int,
                   criteria: Sequence[Criterion], seed: int, start: int = 0,
                   threads: int = 1) -> MonteCarloReport:
    """Estimate the requested criteria over n_reps seeded replicates.

    ``start`` offsets the replicate indices so a run can be split into
    sub-runs whose merge (:func:`merge_reports`) reproduces the unsplit run
    exactly.  The boundary criterion breaks ties at the threshold uniformly
    at random from the replicate's own stream.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    criteria = list(criteria)
    if len({c.name for c in criteria}) != len(criteria):
        raise ValueError("criteria names must be unique")

    indices = range(start, start + n_reps)
    if threads == 1:
        accs = _run_chunk(spec, procedure, criteria, seed, indices)
    else:
        bounds = np.linspace(start, start + n_reps, threads + 1).astype(int)
        chunks = [range(bounds[i], bounds[i + 1]) for i in range(threads)
                  if bounds[i] < bounds[i + 1]]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(
                lambda ch: _run_chunk(spec, procedure, criteria, seed, ch), chunks))
        accs = parts[0]
        for part in parts[1:]:
            for name, acc in accs.items():
                acc.merge(part[name])

    estimates = {}
    for crit in criteria:
        est = accs[crit.name].estimate()
        if est is not None:
            estimates[crit.name] = est
    return MonteCarloReport(
        n_replicates=n_reps,
        estimates=estimates,
        config=_config_echo(spec, procedure, criteria, seed),
        accumulators=accs,
    )


def merge_reports(a: MonteCarloReport, b: MonteCarloReport) -> MonteCarloReport:
    """Exact count-weighted merge of two runs over disjoint replicate ranges."""
    if a.config != b.config:
        raise ValueError("cannot merge reports with different configurations")
    merged: Dict[str, object] = {}
    for name, acc in a.accumulators.items():
        other = b.accumulators[name]
        clone = type(acc)()
        clone.merge(acc)
        clone.merge(other)
        merged[name] = clone
    estimates = {}
    for name, acc in merged.items():
        est = acc.estimate()
        if est is not None:
            estimates[name] = est
    return MonteCarloReport(
        n_replicates=a.n_replicates + b.n_replicates,
        estimates=estimates,
        config=dict(a.config),
        accumulators=merged,
    )


# ---------------------------------------------------------------------------
# Calibration pooling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationCurve:
    """Per-bin null fraction of pooled (score, is-null) pairs."""

    bin_edges: np.ndarray
    bin_null_fraction: np.ndarray
    bin_counts: np.ndarray

    def __post_init__(self):
        for name in ("bin_edges", "bin_null_fraction", "bin_counts"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


_SCORERS = ("p-value", "q-value", "oracle-lfdr", "estimated-lfdr")


def _to_pvalues(data: StatVector) -> np.ndarray:
    if data.scale is Scale.P_VALUE:
        return data.values
    return spstats.norm.sf(data.values)


def _score_replicate(scorer: str, spec, data: StatVector, truth: GroundTruth,
                     oracle) -> np.ndarray:
    if scorer == "oracle-lfdr":
        return np.asarray(oracle(data.values), dtype=float)
    p = _to_pvalues(data)
    if scorer == "p-value":
        return p
    pv = StatVector(np.clip(p, 1e-300, 1.0), Scale.P_VALUE)
    if scorer == "q-value":
        pi0 = storey_pi0(pv, 0.5)
        return q_values(pv, m0_hat=pi0.value * pv.m).qvalues
    if scorer == "estimated-lfdr":
        pi0 = storey_pi0(pv, 0.5)
        fit = grenander_fit(pv)
        return np.minimum(1.0, pi0.value / np.asarray(fit.pdf(pv.values)))
    raise ValueError(f"unknown scorer {scorer!r}; choose from {_SCORERS}")


def calibration_experiment(spec: GeneratorSpec, scorer: str, reps: int,
                           bin_width: float, seed: int) -> CalibrationCurve:
    """Pool scores across replicates and report the null fraction per bin."""
    if not 0.0 < bin_width < 1.0:
        raise ValueError("bin_width must lie in (0, 1)")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    nbins = int(round(1.0 / bin_width))
    if abs(nbins * bin_width - 1.0) > 1e-9:
        raise ValueError("bin_width must divide [0, 1] evenly")
    oracle = oracle_score_fn(spec) if scorer == "oracle-lfdr" else None

    counts = np.zeros(nbins, dtype=np.int64)
    null_counts = np.zeros(nbins, dtype=np.int64)
    for r in range(reps):
        rng = replicate_rng(seed, r)
        data, truth = generate(spec, rng=rng)
        scores = _score_replicate(scorer, spec, data, truth, oracle)
        idx = np.clip((scores / bin_width).astype(int), 0, nbins - 1)
        counts += np.bincount(idx, minlength=nbins)
        null_counts += np.bincount(idx[truth.null_flags], minlength=nbins)

    with np.errstate(invalid="ignore"):
        frac = np.where(counts > 0, null_counts / np.maximum(counts, 1), np.nan)
    edges = np.linspace(0.0, 1.0, nbins + 1)
    return CalibrationCurve(edges, frac, counts)


# ---------------------------------------------------------------------------
# Limit checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LimitRecord:
    eps: float
    mfdr: float
    mfdr_deviation: float
    pfdr: float
    pfdr_deviation: float


def mfdr_pfdr_limit_check(spec: TwoGroupsSpec, t: float,
                          eps_sequence: Sequence[float], m: int = 0,
                          reps: int = 0, seed: int = 0) -> Tuple[LimitRecord, ...]:
    """Interval error rates on [t-eps, t+eps] against the pointwise score.

    The interval ratio-of-expectations is computed analytically from the
    component CDFs; the conditional form is estimated by Monte Carlo when
    ``reps`` > 0 (with ``m`` statistics per replicate, round(pi0*m) null).
    """
    target = spec.pi0 * spec.f0.pdf(t) / mixture_pdf(spec, t)
    records = []
    for eps in eps_sequence:
        if eps <= 0:
            raise ValueError("eps values must be positive")
        lo, hi = t - eps, t + eps
        mass0 = spec.pi0 * (spec.f0.cdf(hi) - spec.f0.cdf(lo))
        mass1 = (1.0 - spec.pi0) * (spec.f1.cdf(hi) - spec.f1.cdf(lo))
        mfdr = mass0 / (mass0 + mass1)
        pfdr = math.nan
        if reps > 0 and m > 0:
            m0 = int(round(spec.pi0 * m))
            acc_sum, acc_n = Fraction(0), 0
            for rep in range(reps):
                rng = replicate_rng(seed, rep)
                vals0 = spec.f0.sample(rng, m0)
                vals1 = spec.f1.sample(rng, m - m0)
                v = int(np.count_nonzero((vals0 >= lo) & (vals0 <= hi)))
                r = v + int(np.count_nonzero((vals1 >= lo) & (vals1 <= hi)))
                if r > 0:
                    acc_sum += Fraction(v, r)
                    acc_n += 1
            if acc_n:
                pfdr = float(acc_sum / acc_n)
        records.append(LimitRecord(
            eps=eps,
            mfdr=float(mfdr),
            mfdr_deviation=abs(float(mfdr) - target),
            pfdr=pfdr,
            pfdr_deviation=abs(pfdr - target) if not math.isnan(pfdr) else math.nan,
        ))
    return tuple(records)


def mixture_pdf(spec: TwoGroupsSpec, t):
    return spec.pi0 * spec.f0.pdf(t) + (1.0 - spec.pi0) * spec.f1.pdf(t)


@dataclass(frozen=True)
class DiscreteLimitRecord:
    m: int
    bfdr: float
    std_error: float
    limit: float
    l_star: int


def discrete_population_maximizer(L: int, alpha: float,
                                  f_star: Sequence[float]) -> Tuple[int, float]:
    """Maximizer of ``alpha * sum_{k<=l} f*(k/L) - l/L`` and the induced limit.

    Raises :class:`AssumptionError` unless the maximizer is unique with a
    strict gap; the limit carries the indicator that the maximizer is
    positive.
    """
    f = np.asarray(f_star, dtype=float)
    if f.size != L or f.min() < 0 or abs(f.sum() - 1.0) > 1e-8:
        raise ValueError("f_star must be a pmf over the L grid points")
    objective = alpha * np.concatenate([[0.0], np.cumsum(f)]) - np.arange(L + 1) / L
    order = np.argsort(objective)
    if objective[order[-1]] - objective[order[-2]] < 1e-9:
        raise AssumptionError("population objective has no unique maximizer")
    l_star = int(order[-1])
    return l_star, objective[l_star]


def discrete_limit_check(L: int, alpha: float, f_star: Sequence[float],
                         pi0_star: float, m_sequence: Sequence[int],
                         n_reps: int, seed: int, perturb: bool = False,
                         start: int = 0) -> Tuple[DiscreteLimitRecord, ...]:
    """Boundary-FDR of the support line on grid p-values versus its m->inf limit.

    ``f_star`` is the limiting average pmf; the alternatives of the finite-m
    design are placed to match ``(f_star - pi0_star/L) / (1 - pi0_star)`` by
    largest-remainder rounding.
    """
    if not 0.0 < pi0_star < 1.0:
        raise ValueError("pi0_star must lie in (0, 1)")
    f = np.asarray(f_star, dtype=float)
    l_star, _ = discrete_population_maximizer(L, alpha, f)
    limit = pi0_star / (L * f[l_star - 1]) if l_star > 0 else 0.0

    alt_pmf = (f - pi0_star / L) / (1.0 - pi0_star)
    if alt_pmf.min() < -1e-9:
        raise ValueError("f_star is incompatible with uniform nulls at pi0_star")
    alt_pmf = np.maximum(alt_pmf, 0.0)

    records = []
    for m in m_sequence:
        m0 = int(round(pi0_star * m))
        m1 = m - m0
        ideal = alt_pmf * m1
        base = np.floor(ideal).astype(int)
        short = m1 - base.sum()
        order = np.argsort(-(ideal - base))
        base[order[:short]] += 1
        positions = tuple(int(k + 1) for k in range(L) for _ in range(base[k]))
        spec = DiscreteUniformNulls(m=m, L=L, alt_positions=positions)
        proc = ProcedureConfig("support-line", alpha, perturb=perturb,
                               grid_L=L if perturb else None)
        report = mc_error_rates(spec, proc, n_reps, [Bfdr()], seed, start=start)
        est = report.estimates["bFDR"]
        records.append(DiscreteLimitRecord(
            m=m, bfdr=est["mean"], std_error=est["std_error"],
            limit=limit, l_star=l_star))
    return tuple(records)


@dataclass(frozen=True)
class NullDensityBoundCheck:
    max_density_on_window: float
    alpha_star: float


def exp_family_null_density_check(theta: float, theta0: float,
                                  grid: Sequence[float]) -> NullDensityBoundCheck:
    """Density of the one-sided Gaussian p-value under a shifted null.

    For p = 1 - Phi(z - theta0) with Z ~ N(theta, 1), theta <= theta0, the
    density at t is exp(delta * q(t) - delta^2 / 2) with q(t) the upper
    t-quantile and delta = theta - theta0.  It is bounded by 1 on
    [0, alpha*] with alpha* = 0.5.
    """
    if theta > theta0:
        raise ValueError("need theta <= theta0 for a null configuration")
    delta = theta - theta0
    alpha_star = float(1.0 - spstats.norm.cdf(0.0))
    pts = np.asarray(grid, dtype=float)
    pts = pts[(pts >= 0.0) & (pts <= alpha_star)]
    if pts.size == 0:
        raise ValueError("grid contains no points inside [0, alpha*]")
    q = spstats.norm.isf(np.clip(pts, 0.0, 1.0))
    if delta == 0.0:
        dens = np.ones_like(pts)
    else:
        with np.errstate(invalid="ignore"):
            dens = np.exp(delta * q - 0.5 * delta * delta)
        dens = np.where(np.isposinf(q), 0.0, dens)
    return NullDensityBoundCheck(float(dens.max()), alpha_star)
