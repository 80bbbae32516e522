import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from aerial_twin.errors import ConfigurationError
from aerial_twin.ran import (SATURATED, LinkParams, SlicedCell, SliceConfig, SliceTimeline, UeBinding,
                             apply_timeline, largest_remainder, prb_throughput, schedule_prbs, spectral_efficiency,
                             ue_throughput_trace, unsliced_throughput, water_fill)

from oracles import hamilton, shannon_prb_bps


def cfg(*shares, wc=True):
    return SliceConfig.from_shares([(f"s{i}", s) for i, s in enumerate(shares)], work_conserving=wc)


def saturated(c):
    return {i: SATURATED for i in c.ids}


# -- schedule_prbs examples -----------------------------------------------------------------------


def test_80_20_saturated():
    c = cfg(0.8, 0.2)
    assert schedule_prbs(c, saturated(c), 100).grants == {"s0": 80, "s1": 20}


def test_50_50_at_15_tie_goes_to_first():
    c = cfg(0.5, 0.5)
    grants = schedule_prbs(c, saturated(c), 15).grants
    assert list(grants.values()) == hamilton([7.5, 7.5], 15) == [8, 7]


def test_idle_slice_releases_everything():
    c = cfg(0.2, 0.8)
    assert schedule_prbs(c, {"s0": SATURATED, "s1": 0}, 100).grants == {"s0": 100, "s1": 0}


def test_non_work_conserving_leaves_capacity_idle():
    c = cfg(0.2, 0.8, wc=False)
    assert schedule_prbs(c, {"s0": SATURATED, "s1": 0}, 100).grants == {"s0": 20, "s1": 0}


def test_demand_cap_redistributes_to_fixpoint():
    c = cfg(0.5, 0.3, 0.2)
    g = schedule_prbs(c, {"s0": 10, "s1": SATURATED, "s2": SATURATED}, 100).grants
    assert g == {"s0": 10, "s1": 54, "s2": 36}


def test_total_prb_must_be_positive():
    with pytest.raises(ValueError):
        schedule_prbs(cfg(1.0), {"s0": SATURATED}, 0)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        cfg(0.5, 0.4)
    with pytest.raises(ConfigurationError):
        SliceConfig(())
    with pytest.raises(ConfigurationError):
        SliceTimeline(((10.0, cfg(1.0)), (10.0, cfg(1.0))))


# -- largest remainder against the textbook oracle -------------------------------------------------


@settings(max_examples=300)
@given(st.lists(st.integers(1, 1000), min_size=1, max_size=8), st.integers(1, 200))
def test_largest_remainder_matches_hamilton(weights, seats):
    total = sum(weights)
    # integer weights keep the quotas exact enough that fractional parts compare identically
    quotas = [w * seats / total for w in weights]
    assert largest_remainder(quotas, seats) == hamilton(quotas, seats)


# -- invariants ---------------------------------------------------------------------------------------

shares_st = st.lists(st.integers(1, 100), min_size=1, max_size=6).map(lambda w: [x / sum(w) for x in w])
demand_st = st.one_of(st.just(SATURATED), st.integers(0, 120).map(float))


@settings(max_examples=300)
@given(shares_st, st.data(), st.integers(1, 120), st.booleans())
def test_conservation_and_demand_caps(shares, data, total, wc):
    c = cfg(*shares, wc=wc)
    demands = {i: data.draw(demand_st) for i in c.ids}
    g = schedule_prbs(c, demands, total).grants
    assert all(isinstance(v, int) and v >= 0 for v in g.values())
    assert sum(g.values()) <= total
    assert all(g[i] <= demands[i] for i in c.ids)
    if wc and sum(min(d, total) for d in demands.values()) >= total:
        assert sum(g.values()) == total


@settings(max_examples=300)
@given(st.lists(st.integers(1, 100), min_size=1, max_size=6), st.integers(1, 120), st.integers(2, 9))
def test_scale_invariance(weights, total, k):
    a = SliceConfig.from_shares([(f"s{i}", w) for i, w in enumerate(weights)], normalize=True)
    b = SliceConfig.from_shares([(f"s{i}", w * k) for i, w in enumerate(weights)], normalize=True)
    assert schedule_prbs(a, saturated(a), total).grants == schedule_prbs(b, saturated(b), total).grants


@settings(max_examples=300)
@given(shares_st, st.integers(1, 200))
def test_proportionality_bound(shares, total):
    c = cfg(*shares)
    g = schedule_prbs(c, saturated(c), total).grants
    for s in c.slices:
        assert abs(g[s.slice_id] / total - s.share) <= 1.0 / total + 1e-12


@settings(max_examples=300)
@given(st.lists(st.integers(1, 100), min_size=2, max_size=6), st.integers(1, 100), st.integers(1, 120))
def test_raising_a_share_never_lowers_its_grant(weights, extra, total):
    lo = SliceConfig.from_shares([(f"s{i}", w) for i, w in enumerate(weights)], normalize=True)
    hi = SliceConfig.from_shares([(f"s{i}", w + (extra if i == 0 else 0)) for i, w in enumerate(weights)],
                                 normalize=True)
    assert schedule_prbs(hi, saturated(hi), total).grants["s0"] >= schedule_prbs(lo, saturated(lo), total).grants["s0"]


@given(st.floats(-10, 40), st.integers(1, 100))
def test_unsliced_equivalence(snr, total):
    cell = SlicedCell(SliceTimeline(()), (UeBinding("ue", "any"),), total)
    tick = cell.step(0.0, {"ue": snr})
    assert tick.raw_bps["ue"] == unsliced_throughput(snr, total)


def test_water_fill_continuous():
    assert water_fill([0.5, 0.5], [10.0, math.inf], 100.0) == [10.0, 90.0]
    assert water_fill([0.2, 0.8], [math.inf, 0.0], 100.0) == [100.0, 0.0]


# -- throughput model ------------------------------------------------------------------------------


def test_zero_prbs_zero_throughput():
    assert prb_throughput(30.0, 0) == 0.0


def test_baseline_calibration():
    assert prb_throughput(60.0, 100) == pytest.approx(170e6, rel=0.01)
    assert prb_throughput(60.0, 100) == pytest.approx(shannon_prb_bps(60.0, 100), rel=1e-12)


@given(st.floats(-20, 60), st.integers(0, 100))
def test_throughput_matches_oracle(snr, n):
    assert prb_throughput(snr, n) == pytest.approx(shannon_prb_bps(snr, n), rel=1e-12, abs=1e-6)


@given(st.floats(-20, 60), st.floats(0, 20), st.integers(1, 100), st.integers(1, 5))
def test_monotone_in_snr_and_linear_in_prbs(snr, dsnr, n, k):
    assert prb_throughput(snr + dsnr, n) >= prb_throughput(snr, n)
    assert prb_throughput(snr, n * k) == pytest.approx(k * prb_throughput(snr, n), rel=1e-12)


def test_spectral_efficiency_edges():
    link = LinkParams()
    assert spectral_efficiency(-math.inf) == 0.0
    assert spectral_efficiency(math.inf) == link.se_max


# -- timeline -----------------------------------------------------------------------------------------


TL = SliceTimeline(((20.0, cfg(0.8, 0.2)), (40.0, cfg(0.2, 0.8)), (60.0, cfg(0.5, 0.5))))


def test_timeline_lookup():
    assert apply_timeline(TL, 5.0) == SliceConfig.unsliced()
    assert apply_timeline(TL, 20.0) == cfg(0.8, 0.2)
    assert apply_timeline(TL, 39.99) == cfg(0.8, 0.2)
    assert apply_timeline(TL, 1e6) == cfg(0.5, 0.5)


# -- traces -------------------------------------------------------------------------------------------


def grid(t_end, dt=0.1, snr=40.0, ues=("A", "B")):
    return [(k * dt, {u: snr for u in ues}) for k in range(int(round(t_end / dt)) + 1)]


def test_static_unsliced_trace_is_flat():
    tr = ue_throughput_trace(SliceTimeline(()), [UeBinding("A", "s0")], grid(10, ues=("A",)), 100)
    assert all(bps == pytest.approx(170e6, rel=1e-12) for _, _, bps in tr)


def test_step_response_follows_first_order_oracle():
    tau, t0, dt = 1.0, 10.0, 0.1
    tl = SliceTimeline(((0.0, cfg(0.8, 0.2)), (t0, cfg(0.2, 0.8))))
    binds = [UeBinding("A", "s0"), UeBinding("B", "s1")]
    tr = [(t, bps) for t, ue, bps in ue_throughput_trace(tl, binds, grid(20), 100, smoothing=tau) if ue == "A"]
    before, after = 0.8 * 170e6, 0.2 * 170e6
    for t, bps in tr:
        if t >= t0 - 1e-9:
            # the first tick at t0 already sees the new grant, so the lag counts from one tick earlier
            oracle = after + (before - after) * math.exp(-(t - t0 + dt) / tau)
            assert bps == pytest.approx(oracle, rel=1e-9)
    settled = [bps for t, bps in tr if t >= t0 + 5 * tau]
    assert all(abs(b - after) <= 0.01 * (before - after) for b in settled)


@pytest.mark.parametrize("total, levels", [(100, [170, 136, 34, 85]), (15, [25.5, 20.4, 5.1, 12.75])])
def test_fig9_schedule_plateaus(total, levels):
    binds = [UeBinding("A", "s0"), UeBinding("B", "s1", active_from=20.0)]
    tr = ue_throughput_trace(TL, binds, grid(80), total)
    a = {round(t, 1): bps for t, ue, bps in tr if ue == "A"}
    for (lo, hi), want in zip([(15, 20), (35, 40), (55, 60), (75, 80)], levels):
        vals = [v for t, v in a.items() if lo <= t < hi]
        assert sum(vals) / len(vals) == pytest.approx(want * 1e6, rel=0.01)


def test_fair_rounding_averages_exactly():
    c = SliceTimeline(((0.0, cfg(0.5, 0.5)),))
    cell = SlicedCell(c, (UeBinding("A", "s0"), UeBinding("B", "s1")), 15)
    grants = [cell.step(k * 0.1, {"A": 40.0, "B": 40.0}).slice_grants for k in range(100)]
    assert sum(g["s0"] for g in grants) / 100 == pytest.approx(7.5)
    assert all(g["s0"] + g["s1"] == 15 for g in grants)


def test_reconfigured_flag():
    cell = SlicedCell(TL, (UeBinding("A", "s0"),), 100)
    flags = [cell.step(t, {"A": 30.0}).reconfigured for t in (0.0, 10.0, 20.0, 20.1)]
    assert flags == [False, False, True, False]
