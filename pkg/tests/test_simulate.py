import json
import math

import numpy as np
import pytest
from scipy import stats as sps

import lfdrkit as lk
from lfdrkit.core import AssumptionError
from lfdrkit.simulate import (
    Bfdr,
    DiscreteCE,
    DiscreteUniformNulls,
    Fdr,
    GGM,
    GaussianMeans,
    MfdrInterval,
    OmegaSpec,
    PfdrInterval,
    Power,
    ProcedureConfig,
    SuperUniformCE,
    TwoGroupsBeta,
    calibration_experiment,
    discrete_limit_check,
    discrete_population_maximizer,
    exp_family_null_density_check,
    generate,
    mc_error_rates,
    merge_reports,
    mfdr_pfdr_limit_check,
    oracle_score_fn,
    replicate_rng,
)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def test_generate_is_deterministic_given_seed():
    spec = GaussianMeans(m=100, m1=10, mu=2.0)
    a, _ = generate(spec, seed=5)
    b, _ = generate(spec, seed=5)
    assert np.array_equal(a.values, b.values)
    c, _ = generate(spec, seed=6)
    assert not np.array_equal(a.values, c.values)


def test_gaussian_means_design():
    spec = GaussianMeans(m=3000, m1=150, mu=2.0)
    stats, truth = generate(spec, seed=1)
    assert stats.m == 3000 and stats.scale is lk.Scale.Z_VALUE
    assert truth.m0 == 2850
    assert truth.pi0_bar == pytest.approx(0.95)
    # the planted block really is shifted
    assert stats.values[:150].mean() > 1.5


def test_two_groups_beta_counts():
    spec = TwoGroupsBeta(m=100, pi0=0.8, a=0.05, b=1.0)
    stats, truth = generate(spec, seed=2)
    assert truth.m0 == 80
    assert stats.scale is lk.Scale.P_VALUE
    assert stats.values.min() >= 0.0 and stats.values.max() <= 1.0


def test_discrete_ce_design():
    stats, truth = generate(DiscreteCE(), seed=3)
    assert np.allclose(stats.values[:5], np.array([1, 1, 2, 3, 4]) / 9.0)
    assert truth.null_flags.tolist() == [False] * 5 + [True]
    assert stats.values[5] in {k / 9 for k in range(1, 10)}


def test_superuniform_ce_design():
    stats, truth = generate(SuperUniformCE(), seed=4)
    assert stats.values[1] == 0.25
    assert truth.null_flags.tolist() == [True, False]
    pooled = np.array([generate(SuperUniformCE(), rng=replicate_rng(4, r))[0].values[0]
                       for r in range(4000)])
    # mass of the three-piece null: 1/8 below 1/4, 3/8 on (1/4, 1/2]
    assert np.mean(pooled <= 0.25) == pytest.approx(0.125, abs=0.02)
    assert np.mean(pooled <= 0.5) == pytest.approx(0.5, abs=0.02)


def test_discrete_uniform_nulls_alt_positions():
    spec = DiscreteUniformNulls(m=20, L=10, alt_positions=(1, 1, 2))
    stats, truth = generate(spec, seed=5)
    assert np.allclose(stats.values[:3], [0.1, 0.1, 0.2])
    assert truth.m0 == 17
    grid = np.rint(stats.values * 10)
    assert np.allclose(stats.values * 10, grid)


def test_ggm_identity_all_null_and_t_distributed():
    d, n = 20, 200
    pooled = []
    for r in range(50):
        stats, truth = generate(GGM(d, n), rng=replicate_rng(123, r))
        assert truth.null_flags.all()
        assert stats.m == d * (d - 1) // 2
        pooled.append(stats.values)
    ks = sps.kstest(np.concatenate(pooled), sps.t(df=n - d).cdf)
    assert ks.statistic < 0.02


def test_ggm_chain_labels_adjacent_pairs():
    stats, truth = generate(GGM(6, 120, OmegaSpec("chain", 0.3)), seed=9)
    labels = dict(zip(stats.ids, truth.null_flags))
    for i in range(5):
        assert labels[f"{i}-{i + 1}"] == np.False_
    assert labels["0-2"] == np.True_
    # strong conditional dependence shows up in the statistics
    adjacent = [v for lab, v in zip(stats.ids, stats.values)
                if not labels[lab]]
    assert np.abs(np.asarray(adjacent)).mean() > 2.0


def test_generate_rejects_bad_specs():
    with pytest.raises(ValueError):
        GaussianMeans(m=5, m1=9, mu=1.0)
    with pytest.raises(ValueError):
        TwoGroupsBeta(m=10, pi0=1.5, a=1.0, b=1.0)
    with pytest.raises(ValueError):
        DiscreteUniformNulls(m=5, L=10, alt_positions=(11,))
    with pytest.raises(ValueError):
        GGM(d=10, n=10)


# ---------------------------------------------------------------------------
# harness
# ---------------------------------------------------------------------------

def test_mc_error_rates_argument_validation():
    spec = TwoGroupsBeta(m=10, pi0=0.5, a=0.5, b=1.0)
    proc = ProcedureConfig("support-line", 0.2)
    with pytest.raises(ValueError):
        mc_error_rates(spec, proc, 0, [Bfdr()], seed=1)
    with pytest.raises(ValueError):
        ProcedureConfig("unknown", 0.2)
    with pytest.raises(ValueError):
        ProcedureConfig("support-line", 0.2, perturb=True)


def test_threaded_run_matches_sequential():
    spec = TwoGroupsBeta(m=40, pi0=0.7, a=0.3, b=1.0)
    proc = ProcedureConfig("support-line", 0.25)
    crits = [Fdr(), Bfdr(), Power(), MfdrInterval(0.0, 0.4), PfdrInterval(0.0, 0.4)]
    seq = mc_error_rates(spec, proc, 300, crits, seed=3, threads=1)
    par = mc_error_rates(spec, proc, 300, crits, seed=3, threads=4)
    assert json.dumps(seq.to_jsonable(), sort_keys=True) == \
        json.dumps(par.to_jsonable(), sort_keys=True)


def test_merge_requires_matching_config():
    spec = TwoGroupsBeta(m=10, pi0=0.5, a=0.5, b=1.0)
    proc = ProcedureConfig("support-line", 0.2)
    a = mc_error_rates(spec, proc, 10, [Bfdr()], seed=1)
    b = mc_error_rates(spec, proc, 10, [Bfdr()], seed=2)
    with pytest.raises(ValueError):
        merge_reports(a, b)


def test_full_interval_mfdr_is_exactly_pi0():
    spec = TwoGroupsBeta(m=50, pi0=0.8, a=0.3, b=1.0)
    proc = ProcedureConfig("support-line", 0.2)
    rep = mc_error_rates(spec, proc, 200, [MfdrInterval(0.0, 1.0)], seed=11)
    assert rep.estimates["mFDR[0.0,1.0]"]["mean"] == pytest.approx(0.8, abs=1e-12)


def test_pfdr_absent_when_never_rejecting():
    # interval that never contains any p-value cannot condition on R > 0
    spec = DiscreteUniformNulls(m=4, L=2, alt_positions=())
    proc = ProcedureConfig("support-line", 0.2)
    rep = mc_error_rates(spec, proc, 50, [PfdrInterval(0.1, 0.2)], seed=1)
    assert "pFDR[0.1,0.2]" not in rep.estimates


def test_storey_bh_procedure_runs():
    spec = TwoGroupsBeta(m=60, pi0=0.6, a=0.1, b=1.0)
    rep = mc_error_rates(spec, ProcedureConfig("storey-bh", 0.1), 200,
                         [Fdr(), Power()], seed=21)
    assert 0.0 <= rep.estimates["FDR"]["mean"] <= 0.2
    assert rep.estimates["power"]["mean"] > 0.3


def test_bh_controls_fdr_at_level():
    spec = TwoGroupsBeta(m=80, pi0=0.75, a=0.1, b=1.0)
    rep = mc_error_rates(spec, ProcedureConfig("bh", 0.1), 4000, [Fdr()], seed=22)
    est = rep.estimates["FDR"]
    assert est["mean"] <= 0.1 * 0.75 + 3 * est["std_error"]


# ---------------------------------------------------------------------------
# calibration pooling
# ---------------------------------------------------------------------------

def test_calibration_all_null_oracle_is_single_top_bin():
    spec = GaussianMeans(m=50, m1=0, mu=2.0)
    curve = calibration_experiment(spec, "oracle-lfdr", 20, 0.025, seed=1)
    assert curve.bin_counts[-1] == 50 * 20
    assert curve.bin_counts[:-1].sum() == 0
    assert curve.bin_null_fraction[-1] == pytest.approx(1.0)


def test_calibration_pvalue_scorer_anticalibrated_direction():
    spec = GaussianMeans(m=3000, m1=150, mu=2.0)
    curve = calibration_experiment(spec, "p-value", 50, 0.025, seed=2)
    mids = 0.5 * (curve.bin_edges[:-1] + curve.bin_edges[1:])
    low = (mids <= 0.1) & (curve.bin_counts >= 200)
    assert np.all(curve.bin_null_fraction[low] > mids[low] + 0.2)


def test_calibration_estimated_lfdr_close_to_diagonal():
    spec = GaussianMeans(m=3000, m1=150, mu=2.0)
    curve = calibration_experiment(spec, "estimated-lfdr", 120, 0.05, seed=3)
    mids = 0.5 * (curve.bin_edges[:-1] + curve.bin_edges[1:])
    use = (curve.bin_counts >= 500) & (mids >= 0.1) & (mids <= 0.9)
    assert use.any()
    assert np.abs(curve.bin_null_fraction[use] - mids[use]).max() < 0.12


def test_calibration_argument_validation():
    spec = GaussianMeans(m=10, m1=1, mu=1.0)
    with pytest.raises(ValueError):
        calibration_experiment(spec, "oracle-lfdr", 0, 0.1, seed=1)
    with pytest.raises(ValueError):
        calibration_experiment(spec, "oracle-lfdr", 5, 0.3, seed=1)
    with pytest.raises(ValueError):
        calibration_experiment(spec, "nope", 5, 0.1, seed=1)
    with pytest.raises(AssumptionError):
        oracle_score_fn(SuperUniformCE())


# ---------------------------------------------------------------------------
# interval limit check
# ---------------------------------------------------------------------------

def test_mfdr_limit_pure_null_is_one():
    spec = lk.TwoGroupsSpec(1.0, lk.GaussianLocation(0.0), lk.GaussianLocation(2.0))
    records = mfdr_pfdr_limit_check(spec, 0.0, (0.5, 0.1))
    assert all(r.mfdr == pytest.approx(1.0) for r in records)


def test_mfdr_limit_matches_quadrature_and_pfdr_converges():
    spec = lk.TwoGroupsSpec(0.95, lk.GaussianLocation(0.0), lk.GaussianLocation(2.0))
    records = mfdr_pfdr_limit_check(spec, 0.0, (0.5, 0.1, 0.02),
                                    m=400, reps=400, seed=9)
    devs = [r.mfdr_deviation for r in records]
    assert devs[0] > devs[1] > devs[2]
    assert devs[2] < 0.01
    assert records[0].pfdr == pytest.approx(records[0].mfdr, abs=0.05)


# ---------------------------------------------------------------------------
# discrete grid checks
# ---------------------------------------------------------------------------

def test_population_maximizer_and_uniqueness():
    L = 10
    f_uniform = [1.0 / L] * L
    l_star, _ = discrete_population_maximizer(L, 0.5, f_uniform)
    assert l_star == 0   # alpha * f = 0.05 < 1/L everywhere

    f_spiky = [0.28] + [0.08] * 9
    l_star, _ = discrete_population_maximizer(L, 0.5, f_spiky)
    assert l_star == 1

    with pytest.raises(AssumptionError):
        # alpha = 1, uniform pmf: objective is identically zero
        discrete_population_maximizer(L, 1.0, f_uniform)


def test_discrete_limit_check_nonzero_branch():
    L, pi0 = 10, 0.8
    f = [0.28] + [0.08] * 9
    rec = discrete_limit_check(L, 0.5, f, pi0, [4000], 4000, seed=13)[0]
    assert rec.l_star == 1
    assert rec.limit == pytest.approx(0.8 / (10 * 0.28))
    assert rec.bfdr == pytest.approx(rec.limit, abs=3.5 * rec.std_error + 0.01)


def test_discrete_exceedance_at_matched_growth():
    # grid length tied to m: the boundary rate overshoots pi0 * alpha
    m = 50
    spec = DiscreteUniformNulls(m=m, L=90, alt_positions=tuple(range(1, 6)))
    rep = mc_error_rates(spec, ProcedureConfig("support-line", 0.5), 10_000,
                         [Bfdr()], seed=14)
    est = rep.estimates["bFDR"]
    assert est["mean"] - 3 * est["std_error"] > 0.9 * 0.5


def test_discrete_long_grid_restores_control():
    # L >> m^2: boundary rate returns below pi0 * alpha + O(m^2 / L)
    m, L = 6, 10_000
    spec = DiscreteUniformNulls(m=m, L=L,
                                alt_positions=tuple(int(L * k / 9) for k in (1, 1, 2, 3, 4)))
    rep = mc_error_rates(spec, ProcedureConfig("support-line", 0.5), 30_000,
                         [Bfdr()], seed=15)
    est = rep.estimates["bFDR"]
    pi0_alpha = (1 / 6) * 0.5
    assert est["mean"] <= pi0_alpha + 3 * est["std_error"] + 36.0 / L


def test_perturbation_restores_exact_boundary_rate():
    spec = DiscreteUniformNulls(m=60, L=9, alt_positions=(1, 1, 2, 3, 4, 1))
    proc = ProcedureConfig("support-line", 0.4, perturb=True, grid_L=9)
    rep = mc_error_rates(spec, proc, 30_000, [Bfdr()], seed=16)
    est = rep.estimates["bFDR"]
    want = (54 / 60) * 0.4
    assert est["mean"] == pytest.approx(want, abs=3 * est["std_error"])


# ---------------------------------------------------------------------------
# null p-value density bound
# ---------------------------------------------------------------------------

def test_null_density_identity_at_theta0():
    grid = np.linspace(0.0, 0.5, 2001)
    res = exp_family_null_density_check(0.0, 0.0, grid)
    assert res.max_density_on_window == pytest.approx(1.0)
    assert res.alpha_star == pytest.approx(0.5)


def test_null_density_increasing_toward_bound():
    grid = np.linspace(0.0, 0.5, 2001)
    theta = -1.0
    q = sps.norm.isf(grid[1:])
    dens = np.exp(theta * q - 0.5 * theta * theta)
    assert np.all(np.diff(dens) > 0)
    res = exp_family_null_density_check(theta, 0.0, grid)
    assert res.max_density_on_window == pytest.approx(dens[-1], rel=1e-9)


def test_null_density_requires_theta_below_theta0():
    with pytest.raises(ValueError):
        exp_family_null_density_check(0.5, 0.0, [0.1, 0.2])


# ---------------------------------------------------------------------------
# conditional-probability and calibration limits
# ---------------------------------------------------------------------------

def test_window_occupancy_null_fraction_matches_score():
    # among windows holding exactly one statistic, the null share matches
    # the pointwise score at the window center
    reps, m, m1 = 50_000, 40, 2
    t, eps = 2.0, 0.02
    rng = np.random.default_rng(77)
    z = rng.normal(size=(reps, m))
    z[:, :m1] += 2.0
    inside = np.abs(z - t) <= eps
    single = inside.sum(axis=1) == 1
    hit_col = inside[single].argmax(axis=1)
    nulls = (hit_col >= m1).mean()
    pi0 = (m - m1) / m
    want = pi0 * sps.norm.pdf(t) / (pi0 * sps.norm.pdf(t)
                                    + (1 - pi0) * sps.norm.pdf(t - 2.0))
    se = math.sqrt(want * (1 - want) / single.sum())
    assert abs(nulls - want) <= 3 * se + 0.01


def test_fdp_over_score_windows_single_large_replicate():
    m, m1 = 100_000, 5000
    rng = replicate_rng(3, 0)
    z = rng.normal(0.0, 1.0, m)
    z[:m1] += 2.0
    isnull = np.arange(m) >= m1
    pi0 = (m - m1) / m
    scores = pi0 * sps.norm.pdf(z) / (
        pi0 * sps.norm.pdf(z) + (1 - pi0) * sps.norm.pdf(z - 2.0))
    eps = m ** -0.25
    for a in (0.2, 0.5, 0.8):
        sel = (scores >= a) & (scores <= a + eps)
        assert sel.any()
        assert abs(isnull[sel].mean() - a) <= 0.05


def test_boundary_score_concentrates_with_m():
    pi0, a, alpha = 0.8, 0.3, 0.3
    spec_curve = oracle_score_fn(TwoGroupsBeta(m=10, pi0=pi0, a=a, b=1.0))
    medians = []
    for m in (1000, 10_000, 100_000):
        m0 = int(round(pi0 * m))
        devs = []
        for r in range(100):
            rng = replicate_rng(99, r)
            p = np.concatenate([rng.beta(a, 1.0, m - m0), rng.random(m0)])
            res = lk.support_line(lk.StatVector(p, lk.Scale.P_VALUE), alpha)
            if res.n_rejections:
                devs.append(abs(float(spec_curve(res.boundary_stat)) - pi0 * alpha))
        medians.append(float(np.median(devs)))
    assert medians[0] > medians[1] > medians[2]
