"""Power-quality metric and compliance tests."""

import math
from datetime import datetime, timezone

import numpy as np
import pytest

from pvramp.errors import SpectrumKindError
from pvramp.ingest import AlignedSeries, Unit
from pvramp.quality import (
    ComplianceLimits,
    FlickerLevels,
    HarmonicSpectrum,
    PhaseMetrics,
    PoiContext,
    SpectrumKind,
    compliance,
    flicker_levels_from_voltage,
    plt,
    pst,
    tdd,
    thd,
    voltage_change,
)

T0 = datetime(2017, 8, 21, 17, 0, tzinfo=timezone.utc)


def vseries(values, res=60):
    return AlignedSeries(
        name="v", unit=Unit.VOLT, start=T0, resolution_s=res, values=tuple(values)
    )


# ---------------------------------------------------------------------------
# voltage change
# ---------------------------------------------------------------------------


def test_voltage_change_balanced_is_zero():
    ctx = PoiContext(r_ohm=0.5, x_ohm=0.8, v_base=280.0, p_load_kw=100.0, p_pv_kw=100.0, q_load_kvar=30.0, q_pv_kvar=30.0)
    assert voltage_change(ctx) == 0.0


def test_voltage_change_direct_substitution():
    # R = 1 ohm, net P = 280 W, V_base = 280 V -> 1 V.
    ctx = PoiContext(r_ohm=1.0, x_ohm=0.0, v_base=280.0, p_load_kw=0.28, p_pv_kw=0.0)
    assert voltage_change(ctx) == pytest.approx(1.0, abs=1e-12)


def test_voltage_change_inverse_in_vbase():
    ctx1 = PoiContext(r_ohm=0.4, x_ohm=0.3, v_base=240.0, p_load_kw=50.0, q_load_kvar=10.0)
    ctx2 = PoiContext(r_ohm=0.4, x_ohm=0.3, v_base=480.0, p_load_kw=50.0, q_load_kvar=10.0)
    assert voltage_change(ctx2) == pytest.approx(voltage_change(ctx1) / 2.0, rel=1e-12)


# ---------------------------------------------------------------------------
# THD / TDD
# ---------------------------------------------------------------------------


def test_thd_no_harmonics():
    s = HarmonicSpectrum.of(SpectrumKind.VOLTAGE, 277.0, {})
    assert thd(s) == 0.0


def test_thd_single_harmonic_five_percent():
    s = HarmonicSpectrum.of(SpectrumKind.VOLTAGE, 100.0, {5: 5.0})
    assert thd(s) == pytest.approx(5.0, abs=1e-12)


def test_thd_three_four_five():
    # sqrt(3^2 + 4^2) = 5 on a fundamental of 100.
    s = HarmonicSpectrum.of(SpectrumKind.VOLTAGE, 100.0, {3: 3.0, 5: 4.0})
    assert thd(s) == pytest.approx(5.0, abs=1e-12)


def test_thd_scale_invariance():
    rng = np.random.default_rng(21)
    for _ in range(25):
        fund = float(rng.uniform(50, 500))
        orders = rng.choice(np.arange(2, 51), size=6, replace=False)
        mags = {int(o): float(rng.uniform(0, 15)) for o in orders}
        base = HarmonicSpectrum.of(SpectrumKind.VOLTAGE, fund, mags)
        k = float(rng.uniform(0.1, 10))
        scaled = HarmonicSpectrum.of(
            SpectrumKind.VOLTAGE, k * fund, {o: k * m for o, m in mags.items()}
        )
        assert thd(scaled) == pytest.approx(thd(base), rel=1e-12)


def test_thd_matches_rss_oracle():
    rng = np.random.default_rng(22)
    for _ in range(25):
        mags = {int(o): float(rng.uniform(0, 10)) for o in range(2, 31)}
        fund = float(rng.uniform(80, 300))
        s = HarmonicSpectrum.of(SpectrumKind.CURRENT, fund, mags)
        expected = 100.0 * math.sqrt(sum(m * m for m in mags.values())) / fund
        assert thd(s) == pytest.approx(expected, rel=1e-12)


def test_tdd_zero_harmonics():
    ctx = PoiContext(r_ohm=0.1, x_ohm=0.1, v_base=280.0, max_demand_current_a=100.0)
    s = HarmonicSpectrum.of(SpectrumKind.CURRENT, 50.0, {})
    assert tdd(s, ctx) == 0.0


def test_tdd_hand_arithmetic():
    ctx = PoiContext(r_ohm=0.1, x_ohm=0.1, v_base=280.0, max_demand_current_a=100.0)
    s = HarmonicSpectrum.of(SpectrumKind.CURRENT, 60.0, {3: 3.0, 7: 4.0})
    assert tdd(s, ctx) == pytest.approx(5.0, abs=1e-12)


def test_tdd_independent_of_fundamental():
    ctx = PoiContext(r_ohm=0.1, x_ohm=0.1, v_base=280.0, max_demand_current_a=100.0)
    mags = {3: 2.0, 5: 1.5, 11: 0.7}
    full = HarmonicSpectrum.of(SpectrumKind.CURRENT, 80.0, mags)
    halved = HarmonicSpectrum.of(SpectrumKind.CURRENT, 40.0, mags)
    assert tdd(full, ctx) == tdd(halved, ctx)


def test_tdd_linear_in_single_harmonic():
    ctx = PoiContext(r_ohm=0.1, x_ohm=0.1, v_base=280.0, max_demand_current_a=50.0)
    one = tdd(HarmonicSpectrum.of(SpectrumKind.CURRENT, 30.0, {5: 1.0}), ctx)
    three = tdd(HarmonicSpectrum.of(SpectrumKind.CURRENT, 30.0, {5: 3.0}), ctx)
    assert three == pytest.approx(3 * one, rel=1e-12)


def test_tdd_rejects_voltage_spectrum():
    ctx = PoiContext(r_ohm=0.1, x_ohm=0.1, v_base=280.0, max_demand_current_a=100.0)
    s = HarmonicSpectrum.of(SpectrumKind.VOLTAGE, 277.0, {3: 1.0})
    with pytest.raises(SpectrumKindError):
        tdd(s, ctx)


def test_spectrum_rejects_out_of_range_orders():
    with pytest.raises(ValueError):
        HarmonicSpectrum.of(SpectrumKind.VOLTAGE, 100.0, {1: 5.0})
    with pytest.raises(ValueError):
        HarmonicSpectrum.of(SpectrumKind.VOLTAGE, 100.0, {51: 5.0})


# ---------------------------------------------------------------------------
# flicker
# ---------------------------------------------------------------------------


def test_pst_all_zero():
    assert pst(FlickerLevels(0, 0, 0, 0, 0)) == 0.0


def test_pst_unit_levels():
    # sqrt(0.0314 + 0.0525 + 0.0657 + 0.28 + 0.08) = sqrt(0.5096)
    got = pst(FlickerLevels(1, 1, 1, 1, 1))
    assert got == pytest.approx(math.sqrt(0.5096), abs=1e-12)
    assert got == pytest.approx(0.71386, abs=1e-5)


def test_pst_sqrt_homogeneity():
    rng = np.random.default_rng(31)
    for _ in range(20):
        lv = rng.uniform(0, 2, size=5)
        k = float(rng.uniform(0.2, 4))
        base = pst(FlickerLevels(*lv))
        scaled = pst(FlickerLevels(*(k * k * lv)))
        assert scaled == pytest.approx(k * base, rel=1e-12)


def test_pst_monotone_in_levels():
    base = FlickerLevels(0.1, 0.1, 0.1, 0.1, 0.1)
    for bump in range(5):
        levels = [0.1] * 5
        levels[bump] += 0.5
        assert pst(FlickerLevels(*levels)) > pst(base)


def test_plt_fixed_point():
    assert plt([0.09] * 12) == pytest.approx(0.09, rel=1e-12)


def test_plt_single_spike():
    got = plt([0.0] * 11 + [1.0])
    assert got == pytest.approx((1.0 / 12.0) ** (1.0 / 3.0), rel=1e-12)
    assert got == pytest.approx(0.43679, abs=1e-5)


def test_plt_permutation_invariant():
    rng = np.random.default_rng(41)
    vals = list(rng.uniform(0, 1, size=12))
    shuffled = list(vals)
    rng.shuffle(shuffled)
    assert plt(shuffled) == pytest.approx(plt(vals), rel=1e-15)


def test_plt_arity_error():
    with pytest.raises(ValueError):
        plt([0.1] * 11)
    with pytest.raises(ValueError):
        plt([0.1] * 13)


def test_flicker_levels_constant_voltage():
    windows = flicker_levels_from_voltage(vseries([280.0] * 20), window_s=600)
    assert len(windows) == 2
    for _, levels in windows:
        assert levels.as_tuple() == (0.0, 0.0, 0.0, 0.0, 0.0)
        assert pst(levels) == 0.0


def test_flicker_levels_match_percentile_oracle():
    rng = np.random.default_rng(51)
    vals = [280.0 + float(v) for v in rng.normal(0, 2.8, size=10)]
    windows = flicker_levels_from_voltage(vseries(vals), window_s=600, v_base=280.0)
    assert len(windows) == 1
    _, levels = windows[0]
    arr = np.array(vals)
    d = np.abs(arr - np.median(arr)) / 280.0
    for got, k in zip(levels.as_tuple(), (0.1, 1.0, 3.0, 10.0, 50.0)):
        assert got == pytest.approx(float(np.quantile(d, 1 - k / 100.0)), abs=1e-15)


def test_flicker_levels_percentile_ordering():
    ramp = [270.0 + i for i in range(10)]
    _, levels = flicker_levels_from_voltage(vseries(ramp), window_s=600, v_base=280.0)[0]
    t = levels.as_tuple()
    assert t[0] >= t[1] >= t[2] >= t[3] >= t[4]


def test_flicker_empty_window_errors():
    with pytest.raises(ValueError):
        flicker_levels_from_voltage(vseries([None] * 10), window_s=600, v_base=280.0)


# ---------------------------------------------------------------------------
# compliance
# ---------------------------------------------------------------------------


def test_compliance_vthd_margin():
    report = compliance([PhaseMetrics(phase="a", vthd_pct=3.4)])
    c = report.check("vthd_pct", "a")
    assert c.passed
    assert c.margin == pytest.approx(1.6, abs=1e-12)


def test_compliance_plt_pass():
    report = compliance([PhaseMetrics(phase="a", plt=0.09)])
    assert report.check("plt", "a").passed
    assert report.overall_pass


def test_compliance_voltage_fail_high():
    report = compliance([PhaseMetrics(phase="a", v_rms_avg=295.0)])
    c = report.check("v_rms_avg", "a")
    assert c.status == "fail_high"
    assert c.margin == pytest.approx(-3.0)
    assert not report.overall_pass


def test_compliance_voltage_fail_low():
    report = compliance([PhaseMetrics(phase="b", v_rms_avg=260.0)])
    assert report.check("v_rms_avg", "b").status == "fail_low"


def test_compliance_skips_unmeasured():
    report = compliance([PhaseMetrics(phase="c", pst=0.08)])
    assert len(report.checks) == 1
    assert report.overall_pass


def test_compliance_limits_validation():
    with pytest.raises(ValueError):
        ComplianceLimits(v_min=300.0, v_max=290.0)
