import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inertiafit import sfr_sim
from inertiafit.errors import (
    InsufficientOverlap,
    InvalidStep,
    MissingColumn,
    NonFiniteValue,
    NonMonotonicTime,
    NonUniformSampling,
    OnsetNotFound,
    TooFewSamples,
)
from inertiafit.timeseries import (
    UniformTrace,
    Unit,
    aggregate_pfr,
    build_event_dataset,
    contingency_deviation,
    detect_onset,
    load_trace_csv,
    resample,
    write_trace_csv,
)


def _csv(tmp_path, body, name="trace.csv"):
    p = tmp_path / name
    p.write_text(body)
    return p


def _step_event(n=1001, dt=0.01, onset_k=200, size=85.0, channels=None):
    t = dt * np.arange(n)
    cont = np.where(np.arange(n) >= onset_k, 0.0, size)
    freq = 50.0 - 0.1 * np.clip(t - onset_k * dt, 0, None)
    if channels is None:
        channels = [UniformTrace(0.0, dt, 10.0 + np.sin(t), channel_id="G1")]
    return build_event_dataset(
        UniformTrace(0.0, dt, freq, unit=Unit.HZ),
        channels,
        UniformTrace(0.0, dt, cont, channel_id="contingency"),
        f_n=50.0, p_load=300.0,
    )


# -- UniformTrace ---------------------------------------------------------------

def test_trace_rejects_bad_input():
    with pytest.raises(InvalidStep):
        UniformTrace(0.0, 0.0, [1.0, 2.0])
    with pytest.raises(TooFewSamples):
        UniformTrace(0.0, 0.1, [1.0])
    with pytest.raises(NonFiniteValue):
        UniformTrace(0.0, 0.1, [1.0, np.nan])


def test_trace_values_are_read_only():
    tr = UniformTrace(0.0, 0.1, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        tr.values[0] = 5.0


# -- CSV ----------------------------------------------------------------------

def test_load_csv_direct_parse(tmp_path):
    p = _csv(tmp_path, "time_s,value\n0.00,50.0\n0.01,50.0\n0.02,49.99\n")
    tr = load_trace_csv(p)
    assert tr.dt == pytest.approx(0.01, rel=1e-12)
    assert tr.values.tolist() == [50.0, 50.0, 49.99]
    assert tr.start_time == 0.0


def test_load_csv_non_monotonic(tmp_path):
    p = _csv(tmp_path, "time_s,value\n0.0,1\n0.02,2\n0.01,3\n")
    with pytest.raises(NonMonotonicTime):
        load_trace_csv(p)


def test_load_csv_errors(tmp_path):
    with pytest.raises(MissingColumn):
        load_trace_csv(_csv(tmp_path, "t,v\n0,1\n1,2\n"))
    with pytest.raises(TooFewSamples):
        load_trace_csv(_csv(tmp_path, "time_s,value\n0,1\n"))
    with pytest.raises(NonFiniteValue):
        load_trace_csv(_csv(tmp_path, "time_s,value\n0,1\n1,nan\n"))
    with pytest.raises(FileNotFoundError):
        load_trace_csv(tmp_path / "absent.csv")


def test_load_csv_comments_and_custom_columns(tmp_path):
    body = "# unit: Hz\n# channel_id: bus7\nstamp,f\n# mid-file remark\n0,50\n0.5,49.9\n1.0,49.8\n"
    tr = load_trace_csv(_csv(tmp_path, body), {"stamp": "time", "f": "value"})
    assert tr.unit is Unit.HZ
    assert tr.channel_id == "bus7"
    assert tr.values.tolist() == [50.0, 49.9, 49.8]


def test_load_csv_jitter_tolerance(tmp_path):
    times = 0.01 * np.arange(50)
    times[7] += 0.01 * 5e-7  # inside the 1e-6 relative tolerance
    body = "time_s,value\n" + "".join(f"{float(t)!r},{i}\n" for i, t in enumerate(times))
    tr = load_trace_csv(_csv(tmp_path, body))
    assert len(tr) == 50
    assert tr.dt == pytest.approx(0.01, rel=1e-6)


def test_load_csv_non_uniform_needs_explicit_step(tmp_path):
    body = "time_s,value\n0,0\n0.1,1\n0.3,3\n0.4,4\n"
    p = _csv(tmp_path, body)
    with pytest.raises(NonUniformSampling):
        load_trace_csv(p)
    tr = load_trace_csv(p, dt=0.1)
    np.testing.assert_allclose(tr.values, [0, 1, 2, 3, 4], atol=1e-12)


def test_csv_round_trip_bit_exact(tmp_path, rng):
    tr = UniformTrace(1.25, 0.02, rng.normal(size=300), unit=Unit.HZ, channel_id="x")
    write_trace_csv(tr, tmp_path / "x.csv")
    back = load_trace_csv(tmp_path / "x.csv")
    assert back == tr
    assert back.unit is Unit.HZ and back.channel_id == "x"


def test_fault_recorder_export_round_trip(tmp_path):
    # 20 ms recorder resolution over 20 s
    cfg = sfr_sim.case1_analog(dt=0.02, duration=20.0)
    event = sfr_sim.simulate_event(cfg)
    sfr_sim.export_event(event, tmp_path)
    tr = load_trace_csv(tmp_path / "frequency.csv")
    assert len(tr) == 1001
    assert tr.dt == pytest.approx(0.02, rel=1e-9)
    np.testing.assert_allclose(tr.values, event.dataset.frequency.values, rtol=1e-9)


# -- resample -----------------------------------------------------------------

def test_resample_constant_bit_identical():
    tr = UniformTrace(0.0, 0.02, np.full(51, 50.0))
    out = resample(tr, 0.01)
    assert len(out) == 101
    assert np.all(out.values == 50.0)


def test_resample_ramp_midpoint():
    tr = UniformTrace(0.0, 0.1, np.linspace(0.0, 1.0, 11))
    out = resample(tr, 0.05)
    assert out.values[1] == pytest.approx(0.05, abs=1e-15)
    assert out.values[0] == tr.values[0] and out.values[-1] == tr.values[-1]


def test_resample_sinusoid_against_closed_form():
    t = 0.001 * np.arange(2001)
    tr = UniformTrace(0.0, 0.001, np.sin(2 * np.pi * t))
    out = resample(tr, 0.01)
    err = np.max(np.abs(out.values - np.sin(2 * np.pi * out.times)))
    assert err < 1e-4


def test_resample_rejects_nonpositive_step():
    tr = UniformTrace(0.0, 0.1, [1.0, 2.0, 3.0])
    for bad in (0.0, -0.1, math.nan):
        with pytest.raises(InvalidStep):
            resample(tr, bad)


@settings(max_examples=30, deadline=None)
@given(st.floats(-1e3, 1e3, allow_nan=False), st.integers(2, 200),
       st.sampled_from([0.001, 0.005, 0.01, 0.02, 0.05]))
def test_resample_constant_property(c, n, dt_new):
    tr = UniformTrace(0.0, 0.01, np.full(n, c))
    out = resample(tr, dt_new)
    assert np.all(out.values == c)


# -- dataset ------------------------------------------------------------------

def test_build_dataset_step_size():
    ds = _step_event()
    assert ds.p_cont_size == pytest.approx(85.0, abs=1e-12)
    assert ds.onset_time == pytest.approx(2.0, abs=1e-12)


def test_build_dataset_disjoint_spans():
    a = UniformTrace(0.0, 0.01, np.zeros(100))
    b = UniformTrace(10.0, 0.01, np.zeros(100))
    with pytest.raises(InsufficientOverlap):
        build_event_dataset(a, [a], b, f_n=50.0, p_load=100.0, onset=0.5)


def test_build_dataset_requires_five_seconds_after_onset():
    n = 600
    cont = UniformTrace(0.0, 0.01, np.where(np.arange(n) >= 200, 0.0, 85.0))
    flat = UniformTrace(0.0, 0.01, np.full(n, 50.0))
    with pytest.raises(InsufficientOverlap):
        build_event_dataset(flat, [flat], cont, f_n=50.0, p_load=100.0)


def test_build_dataset_uses_coarsest_step():
    n_fine = 2001
    fine = UniformTrace(0.0, 0.005, 50.0 - 0.001 * np.arange(n_fine))
    cont = UniformTrace(0.0, 0.01, np.where(np.arange(1001) >= 100, 0.0, 85.0))
    pfr = UniformTrace(0.0, 0.02, np.zeros(501), channel_id="G1")
    ds = build_event_dataset(fine, [pfr], cont, f_n=50.0, p_load=100.0)
    assert ds.dt == 0.02
    assert len(ds.frequency) == len(ds.contingency) == len(ds.pfr_channels[0]) == 501


def test_build_dataset_idempotent():
    ds = _step_event()
    again = build_event_dataset(ds.frequency, ds.pfr_channels, ds.contingency,
                                f_n=ds.f_n, p_load=ds.p_load, onset=ds.onset_time)
    assert again.frequency == ds.frequency
    assert again.contingency == ds.contingency
    assert all(a == b for a, b in zip(again.pfr_channels, ds.pfr_channels))
    assert again.onset_time == ds.onset_time
    assert again.p_cont_size == ds.p_cont_size


def test_case1_steady_state_pfr_balance():
    # long run so the lead-lag has settled; derived from the equilibrium of
    # the swing equation: PFR = P_cont + (D/100) P_load df_ss
    cfg = sfr_sim.case1_analog(duration=150.0)
    event = sfr_sim.simulate_event(cfg)
    ds = event.dataset
    df_ss = event.truth.frequency.values[-1] - cfg.f_n
    expected = cfg.p_cont + cfg.d_true / 100.0 * cfg.p_load * df_ss
    agg = aggregate_pfr(ds).values
    assert agg[-1] == pytest.approx(expected, abs=0.1)
    assert expected == pytest.approx(
        85.0 * (1 - cfg.d_true / 100 * cfg.p_load * abs(df_ss) / 85.0), abs=1e-9)


# -- aggregate ----------------------------------------------------------------

def test_aggregate_single_channel_is_rebased_channel():
    ds = _step_event()
    ch = ds.pfr_channels[0].values
    base = ch[ds.onset_index - 10:ds.onset_index].mean()
    np.testing.assert_allclose(aggregate_pfr(ds).values, ch - base, atol=1e-12)


def test_aggregate_two_identical_channels_doubles():
    t = 0.01 * np.arange(1001)
    ch = UniformTrace(0.0, 0.01, 10.0 + np.cos(3 * t), channel_id="G1")
    one = aggregate_pfr(_step_event(channels=[ch])).values
    two = aggregate_pfr(_step_event(channels=[ch, ch.with_values(ch.values, channel_id="G2")]))
    np.testing.assert_array_equal(two.values, 2.0 * one)


def test_aggregate_is_linear(rng):
    a = UniformTrace(0.0, 0.01, rng.normal(size=1001), channel_id="A")
    b = UniformTrace(0.0, 0.01, rng.normal(size=1001), channel_id="B")
    agg_a = aggregate_pfr(_step_event(channels=[a])).values
    agg_b = aggregate_pfr(_step_event(channels=[b])).values
    agg_ab = aggregate_pfr(_step_event(channels=[a, b])).values
    np.testing.assert_allclose(agg_ab, agg_a + agg_b, atol=1e-12)


def test_aggregate_matches_simulator_governor_total(case1_no_machine_inertia):
    event = case1_no_machine_inertia
    agg = aggregate_pfr(event.dataset).values
    assert np.max(np.abs(agg - event.truth.governor_total.values)) < 1e-9


def test_aggregate_with_inertia_is_governor_plus_inertial(case1):
    truth = case1.truth
    expected = truth.governor_total.values + sum(tr.values for tr in truth.inertial_per_machine)
    agg = aggregate_pfr(case1.dataset).values
    assert np.max(np.abs(agg - expected)) < 1e-9


def test_contingency_deviation_is_lost_power(case1):
    dev = contingency_deviation(case1.dataset).values
    np.testing.assert_allclose(dev, case1.truth.lost_power.values, atol=1e-12)


# -- onset --------------------------------------------------------------------

def test_detect_onset_step():
    cont = UniformTrace(0.0, 0.01, np.where(np.arange(500) >= 200, 0.0, 85.0))
    assert detect_onset(cont) == pytest.approx(2.0, abs=0.01)


def test_detect_onset_constant_raises():
    with pytest.raises(OnsetNotFound):
        detect_onset(UniformTrace(0.0, 0.01, np.full(100, 85.0)))


def test_detect_onset_ramp_matches_argmax():
    # 500 ms ramp-down whose steepest step sits in the middle of the ramp
    t = 0.01 * np.arange(600)
    shape = 0.5 - 0.5 * np.cos(np.pi * np.clip((t - 2.0) / 0.5, 0.0, 1.0))
    cont = UniformTrace(0.0, 0.01, 85.0 * (1.0 - shape))
    steps = np.abs(np.diff(cont.values))
    first_big = int(np.flatnonzero(steps > 0.5 * steps.max())[0]) + 1
    assert detect_onset(cont, floor=1.0) == pytest.approx(t[first_big], abs=1e-12)
    # a linear ramp has equal steps, so the first ramp sample is the steepest
    lin = UniformTrace(0.0, 0.01, 85.0 * (1 - np.clip((t - 2.0) / 0.5, 0, 1)))
    assert detect_onset(lin, floor=1.0) == pytest.approx(2.01, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(20, 400), st.floats(-100.0, 100.0, allow_nan=False),
       st.floats(10.0, 500.0))
def test_detect_onset_translation_equivariant(k, tau, size):
    vals = np.where(np.arange(500) >= k, 0.0, size)
    base = detect_onset(UniformTrace(0.0, 0.01, vals))
    shifted = detect_onset(UniformTrace(tau, 0.01, vals))
    assert shifted - tau == pytest.approx(base, abs=1e-9)
