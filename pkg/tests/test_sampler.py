"""Seeded ensemble sampler: purity in (seed, index), thread-invariant
reports, the per-record bookkeeping identity, and honest refusals."""

import math

import pytest
from scipy import stats

from hypdet import (
    DomainError,
    MomentDivergesByTheorem,
    SampleRecord,
    SamplerConfig,
    ag_event_stats,
    histogram_csv,
    mc_experiment,
    moment_estimate,
    records_csv,
    run_sample,
    sample_surface,
    wilson_interval,
)
from hypdet.report import canonical_json
from hypdet.sampler import WP_CELL_CAVEAT
from hypdet.selberg import SHORT_LENGTH, constant_E


def small_config(**kw):
    base = dict(genus=2, n_samples=4, seed=7)
    base.update(kw)
    return SamplerConfig(**base)


# ---------------------------------------------------------------------------
# the draw


def test_draw_is_pure_in_seed_and_index():
    cfg = small_config(n_samples=8)
    a = sample_surface(cfg, 3)
    b = sample_surface(cfg, 3)
    assert a.lengths == b.lengths and a.twists == b.twists
    c = sample_surface(cfg, 4)
    assert a.lengths != c.lengths
    other = sample_surface(small_config(n_samples=8, seed=8), 3)
    assert a.lengths != other.lengths


def test_draw_ranges():
    cfg = small_config(n_samples=64)
    for i in range(64):
        fn = sample_surface(cfg, i)
        for l, t in zip(fn.lengths, fn.twists):
            assert cfg.l_min < l <= cfg.l_max
            assert 0.0 <= t < l


def test_draw_rejects_out_of_range_index():
    cfg = small_config()
    with pytest.raises(DomainError):
        sample_surface(cfg, cfg.n_samples)
    with pytest.raises(DomainError):
        sample_surface(cfg, -1)


def test_draw_marginals_are_uniform():
    """KS test on the first coordinate's length and twist fraction over ten
    thousand draws; the counter-based stream must look i.i.d. uniform."""
    cfg = small_config(n_samples=10000)
    u_len, u_twist = [], []
    for i in range(cfg.n_samples):
        fn = sample_surface(cfg, i)
        u_len.append((cfg.l_max - fn.lengths[0]) / (cfg.l_max - cfg.l_min))
        u_twist.append(fn.twists[0] / fn.lengths[0])
    assert stats.kstest(u_len, "uniform").statistic <= 0.02
    assert stats.kstest(u_twist, "uniform").statistic <= 0.02


def test_config_validation():
    with pytest.raises(DomainError):
        small_config(genus=1)
    with pytest.raises(DomainError):
        small_config(l_min=0.01)  # below the group conditioning floor
    with pytest.raises(DomainError):
        small_config(l_min=3.0, l_max=2.0)
    with pytest.raises(DomainError):
        small_config(eta=0.2)  # at or above 3/16 is not a gap threshold
    with pytest.raises(DomainError):
        small_config(alpha=1.0)
    with pytest.raises(DomainError):
        small_config(beta_list=(0.5, 2.0))
    with pytest.raises(DomainError):
        small_config(seed=-1)
    with pytest.raises(DomainError):
        small_config(spectrum_cutoff=1.0)


# ---------------------------------------------------------------------------
# single-sample pipeline


def test_run_sample_record_identity():
    cfg = small_config()
    rec = run_sample(cfg, 0)
    # normalized determinant minus normalized zeta derivative is exactly the
    # area-density constant, per sample
    assert abs(rec.log_det_norm - rec.log_z0_norm - constant_E()) <= 1e-12
    assert rec.short_pairs >= 0
    cap = cfg.c_short * cfg.genus ** cfg.alpha
    assert rec.in_ag == (rec.lambda1_est >= cfg.eta and rec.short_pairs <= cap)
    assert rec.errors["combined"] > 0.0


# ---------------------------------------------------------------------------
# fleet experiment


def test_experiment_is_thread_invariant():
    cfg = small_config()
    rep1 = mc_experiment(cfg, threads=1)
    rep2 = mc_experiment(cfg, threads=2)
    assert canonical_json(rep1) == canonical_json(rep2)


def test_experiment_is_seed_deterministic():
    cfg = small_config(n_samples=2)
    a = mc_experiment(cfg)
    b = mc_experiment(cfg)
    assert canonical_json(a) == canonical_json(b)
    c = mc_experiment(small_config(n_samples=2, seed=8))
    assert canonical_json(a) != canonical_json(c)


def test_experiment_report_contents():
    cfg = small_config()
    rep = mc_experiment(cfg)
    assert rep["label"] == "WP-cell approximation"
    assert rep["caveat"] == WP_CELL_CAVEAT
    assert "over-counted" in rep["caveat"]
    assert rep["n_success"] + rep["n_excluded"] == cfg.n_samples
    assert len(rep["records"]) == rep["n_success"]
    for r in rep["records"]:
        assert abs(r["log_det_norm"] - r["log_z0_norm"] - constant_E()) <= 1e-12
    assert set(rep["moments"]) == {"%.6g" % b for b in cfg.beta_list}
    assert sum(b["count"] for b in rep["histogram"]) == rep["n_success"]
    assert rep["ag_stats"]["n"] == rep["n_success"]


def test_experiment_with_zero_samples():
    rep = mc_experiment(small_config(n_samples=0))
    assert rep["n_success"] == 0 and rep["n_excluded"] == 0
    assert rep["moments"] == {} and rep["histogram"] == []
    assert rep["ag_stats"] is None and rep["mean_log_det_norm"] is None
    assert records_csv(rep).count("\n") == 1  # header only


def test_short_curve_configs_populate_short_pairs():
    # every sampled curve sits below the collar threshold here
    cfg = small_config(
        n_samples=2, seed=11, l_min=0.8, l_max=1.6, spectrum_cutoff=6.0
    )
    assert cfg.l_max < SHORT_LENGTH
    rep = mc_experiment(cfg)
    assert rep["n_success"] == 2
    assert all(r["short_pairs"] > 0 for r in rep["records"])


def test_csv_emitters_shape():
    rep = mc_experiment(small_config(n_samples=2))
    rows = records_csv(rep).strip().split("\n")
    assert rows[0].startswith("index,log_det_norm")
    assert len(rows) == 1 + rep["n_success"]
    assert rows[1].split(",")[5] in ("0", "1")
    hrows = histogram_csv(rep).strip().split("\n")
    assert hrows[0] == "bin_lo,bin_hi,count"
    assert len(hrows) == 1 + len(rep["histogram"])


# ---------------------------------------------------------------------------
# estimators


def fake_records(values):
    return [
        SampleRecord(
            index=i,
            fn_coords=None,
            log_det_norm=v,
            log_z0_norm=v - constant_E(),
            lambda1_est=0.1,
            short_pairs=0,
            in_ag=True,
        )
        for i, v in enumerate(values)
    ]


def test_moment_estimate_matches_hand_mean():
    recs = fake_records([0.1, 0.2, 0.4])
    mean, err = moment_estimate(recs, 1.0)
    assert abs(mean - (0.1 + 0.2 + 0.4) / 3.0) < 1e-15
    assert err > 0.0
    mean2, _ = moment_estimate(recs, 0.5)
    hand = sum(abs(v) ** 0.5 for v in (0.1, 0.2, 0.4)) / 3.0
    assert abs(mean2 - hand) < 1e-15


def test_moment_estimate_refuses_divergent_beta():
    recs = fake_records([0.1])
    with pytest.raises(MomentDivergesByTheorem) as exc:
        moment_estimate(recs, 2.0)
    assert "infinite" in str(exc.value)
    with pytest.raises(DomainError):
        moment_estimate(recs, 0.0)
    with pytest.raises(DomainError):
        moment_estimate([], 1.0)


def test_wilson_interval_behavior():
    lo, hi = wilson_interval(0, 20)
    assert lo == 0.0 and hi > 0.0
    lo, hi = wilson_interval(20, 20)
    assert hi == 1.0 and lo < 1.0
    w10 = wilson_interval(5, 10)
    w100 = wilson_interval(50, 100)
    assert (w100[1] - w100[0]) < (w10[1] - w10[0])  # shrinks with n
    with pytest.raises(DomainError):
        wilson_interval(0, 0)


def test_ag_stats_reevaluates_membership():
    recs = fake_records([0.1, 0.2])
    recs[0].lambda1_est = 0.5
    recs[0].short_pairs = 0
    recs[1].lambda1_est = 0.001  # below any sensible gap threshold
    recs[1].short_pairs = 99
    recs[0].fn_coords = recs[1].fn_coords = sample_surface(small_config(), 0)
    out = ag_event_stats(recs, eta=0.02, c_short=4.0, alpha=0.5)
    assert out["in_ag"]["count"] == 1
    assert out["gap_below_eta"]["count"] == 1
    assert out["short_excess"]["count"] == 1
    assert out["n"] == 2
    with pytest.raises(DomainError):
        ag_event_stats([], 0.02, 4.0, 0.5)
