"""Synthetic disturbance events with known inertia and load relief.

The plant is a single aggregate swing equation driven by the contingency,
a fleet of droop governors (first-order valve lag followed by a lead-lag
turbine) and an optional fast frequency response (FFR) source. It is
integrated with the implicit trapezoidal rule on a grid ten times finer
than the output step, so its discretisation error is independent of the
predictor used by the estimators.

Measurement artifacts (oscillation, fault transient, noise) are added to the
measured copies only; the ``truth`` of a :class:`SyntheticEvent` is clean.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidConfig, IoFailure, UnstableScenario
from .timeseries import EventDataset, UniformTrace, Unit, build_event_dataset, write_trace_csv

__all__ = [
    "GovernorParams",
    "FFRParams",
    "Artifacts",
    "ScenarioConfig",
    "EventTruth",
    "SyntheticEvent",
    "simulate_event",
    "governor_response",
    "export_event",
    "case1_analog",
    "case2_analog",
    "case3_analog",
    "case5_analog",
]

SUBSTEPS = 10


@dataclass(frozen=True)
class GovernorParams:
    """Droop governor with valve lag ``t1`` and turbine lead-lag ``(t2, t3)``.

    ``headroom_up``/``headroom_down`` bound the valve deviation from its
    pre-event position (MW). ``inertia`` and ``p0`` only shape the machine's
    measured electrical output: ``p0 + governor + inertial``.
    """

    droop: float = 0.05
    rating: float = 100.0
    t1: float = 0.5
    t2: float = 1.0
    t3: float = 7.0
    headroom_up: float = math.inf
    headroom_down: float = math.inf
    inertia: float = 0.0
    p0: float = 0.0
    channel_id: str = ""

    def __post_init__(self):
        if not self.droop > 0:
            raise InvalidConfig(f"droop must be positive, got {self.droop!r}")
        if not (self.t1 > 0 and self.t3 > 0 and self.t2 >= 0):
            raise InvalidConfig("governor time constants need t1 > 0, t3 > 0, t2 >= 0")
        if not (self.headroom_up >= 0 and self.headroom_down >= 0):
            raise InvalidConfig("headroom must be >= 0")
        if not (self.rating > 0 and self.inertia >= 0):
            raise InvalidConfig("rating must be positive and inertia >= 0")

    def gain(self, f_n: float) -> float:
        """Steady-state MW per Hz of frequency drop."""
        return self.rating / (self.droop * f_n)


@dataclass(frozen=True)
class FFRParams:
    """Delayed, ramp-limited injection armed by a deadband crossing."""

    capacity: float
    deadband: float = 0.1
    delay: float = 0.1
    ramp_time: float = 0.2
    channel_id: str = "ffr"

    def __post_init__(self):
        if not (self.capacity >= 0 and self.deadband >= 0 and self.delay >= 0
                and self.ramp_time >= 0):
            raise InvalidConfig("FFR fields must be >= 0")

    def power(self, t: np.ndarray, t_trigger: float) -> np.ndarray:
        start = t_trigger + self.delay
        if self.ramp_time == 0:
            return np.where(t >= start, self.capacity, 0.0)
        return self.capacity * np.clip((t - start) / self.ramp_time, 0.0, 1.0)


@dataclass(frozen=True)
class Artifacts:
    """Measurement artifacts.

    The oscillation is ``-a exp(-damping t) sin(2 pi f t)`` and the transient
    a half-sine dip ``-a sin(pi t / duration)``, both starting at the
    contingency. ``noise_sigma`` (Hz) applies to frequency and
    ``power_noise_sigma`` (MW) to every power channel.
    """

    oscillation_amplitude: float = 0.0
    oscillation_frequency: float = 1.5
    oscillation_damping: float = 0.3
    transient_amplitude: float = 0.0
    transient_duration: float = 0.15
    noise_sigma: float = 0.0
    power_noise_sigma: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) >= 0:
                raise InvalidConfig(f"artifact field {f.name} must be >= 0")


@dataclass(frozen=True)
class ScenarioConfig:
    ke_true: float
    d_true: float
    p_load: float
    p_cont: float
    f_n: float = 50.0
    step_time: float = 1.0
    ramp_duration: float = 0.0
    governors: tuple = ()
    ffr: Optional[FFRParams] = None
    artifacts: Artifacts = field(default_factory=Artifacts)
    dt: float = 0.01
    duration: float = 25.0
    seed: int = 0
    instability_limit: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "governors", tuple(self.governors))
        if not (self.ke_true > 0 and self.p_load > 0 and self.f_n > 0):
            raise InvalidConfig("ke_true, p_load and f_n must be positive")
        if not (self.d_true >= 0 and self.p_cont >= 0 and self.ramp_duration >= 0):
            raise InvalidConfig("d_true, p_cont and ramp_duration must be >= 0")
        if not 0 < self.dt <= 0.02:
            raise InvalidConfig(f"dt must lie in (0, 0.02], got {self.dt!r}")
        if self.duration < 20:
            raise InvalidConfig(f"duration must be >= 20 s, got {self.duration!r}")
        if not 0.1 + self.dt <= self.step_time <= self.duration - 5:
            raise InvalidConfig("step_time needs 100 ms of pre-event data and 5 s after")
        k = self.step_time / self.dt
        if abs(k - round(k)) > 1e-6:
            raise InvalidConfig("step_time must be a multiple of dt")
        ids = [g.channel_id for g in self.governors]
        if len(set(ids)) != len(ids):
            raise InvalidConfig("governor channel ids must be unique")

    @property
    def machine_inertia(self) -> float:
        return float(sum(g.inertia for g in self.governors))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["governors"] = [asdict(g) for g in self.governors]
        return _jsonable(d)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        try:
            govs = tuple(GovernorParams(**_floats(g, ("headroom_up", "headroom_down")))
                         for g in data.pop("governors", ()))
            ffr = data.pop("ffr", None)
            ffr = FFRParams(**ffr) if ffr else None
            art = Artifacts(**data.pop("artifacts", {}))
            return cls(governors=govs, ffr=ffr, artifacts=art, **data)
        except TypeError as exc:
            raise InvalidConfig(f"bad scenario config: {exc}") from None


def _floats(d: dict, keys) -> dict:
    d = dict(d)
    for k in keys:
        if isinstance(d.get(k), str):
            d[k] = float(d[k])
    return d


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


@dataclass(frozen=True, eq=False)
class EventTruth:
    ke: float
    d: float
    governor_total: UniformTrace
    inertial_per_machine: tuple
    governor_per_machine: tuple
    frequency: UniformTrace
    rocof: UniformTrace
    ffr: Optional[UniformTrace]
    lost_power: UniformTrace
    machine_inertia: float


@dataclass(frozen=True, eq=False)
class SyntheticEvent:
    dataset: EventDataset
    truth: EventTruth
    config: ScenarioConfig


# -- governor -----------------------------------------------------------------

def _governor_matrices(params: GovernorParams, h: float):
    """Trapezoidal update for the (valve, lead-lag state) pair driven by a reference."""
    a = np.array([[-1.0 / params.t1, 0.0],
                  [1.0 / params.t3, -1.0 / params.t3]])
    b = np.array([1.0 / params.t1, 0.0])
    lhs = np.eye(2) - 0.5 * h * a
    m = np.linalg.solve(lhs, np.eye(2) + 0.5 * h * a)
    n = np.linalg.solve(lhs, 0.5 * h * b)
    return m, n


def _leadlag_output(params: GovernorParams, valve, state):
    ratio = params.t2 / params.t3
    return ratio * valve + (1.0 - ratio) * state


def governor_response(params: GovernorParams, frequency: UniformTrace, *,
                      f_n: float = 50.0) -> UniformTrace:
    """Mechanical power deviation (MW) of one governor driven by ``frequency``.

    The reference ``-df/(droop f_n) * rating`` uses the deviation from the
    first sample, passes through the valve lag ``t1`` (non-windup limited to
    the headroom) and the lead-lag ``(1 + t2 s)/(1 + t3 s)``. The input is
    interpolated linearly between samples.
    """
    df = frequency.values - frequency.values[0]
    ref = -params.gain(f_n) * df
    m, n = _governor_matrices(params, frequency.dt)
    lo, hi = -params.headroom_down, params.headroom_up
    valve = np.zeros(ref.size)
    state = np.zeros(ref.size)
    x = np.zeros(2)
    for k in range(1, ref.size):
        x = m @ x + n * (ref[k - 1] + ref[k])
        x[0] = min(max(x[0], lo), hi)
        valve[k], state[k] = x
    out = np.clip(_leadlag_output(params, valve, state), lo, hi)
    return UniformTrace(frequency.start_time, frequency.dt, out, unit=Unit.MW,
                        channel_id=params.channel_id or "governor")


# -- plant --------------------------------------------------------------------

def _lost_power(cfg: ScenarioConfig, t: np.ndarray, side: str = "right") -> np.ndarray:
    """Lost power at ``t``; ``side`` picks the one-sided limit at a step."""
    rel = t - cfg.step_time
    if cfg.ramp_duration > 0:
        return cfg.p_cont * np.clip(rel / cfg.ramp_duration, 0.0, 1.0)
    tol = 1e-9 * cfg.dt
    if side == "right":
        return np.where(rel >= -tol, cfg.p_cont, 0.0)
    return np.where(rel > tol, cfg.p_cont, 0.0)


def _integrate(cfg: ScenarioConfig):
    """Fine-grid trapezoidal integration of the coupled plant.

    Returns fine time, frequency deviation, per-governor output, FFR power
    and the exact frequency derivative (right-hand side) on the fine grid.
    """
    h = cfg.dt / SUBSTEPS
    n_out = int(round(cfg.duration / cfg.dt)) + 1
    n_fine = (n_out - 1) * SUBSTEPS + 1
    t = h * np.arange(n_fine)
    govs = cfg.governors
    ng = len(govs)
    c = cfg.f_n / (2.0 * cfg.ke_true)
    damp = c * cfg.d_true / 100.0 * cfg.p_load

    # state: [df, valve_1, state_1, ..., valve_n, state_n]
    dim = 1 + 2 * ng
    a = np.zeros((dim, dim))
    a[0, 0] = -damp
    out_row = np.zeros(dim)
    for i, g in enumerate(govs):
        iv, iw = 1 + 2 * i, 2 + 2 * i
        ratio = g.t2 / g.t3
        out_row[iv], out_row[iw] = ratio, 1.0 - ratio
        a[iv, 0] = -g.gain(cfg.f_n) / g.t1
        a[iv, iv] = -1.0 / g.t1
        a[iw, iv] = 1.0 / g.t3
        a[iw, iw] = -1.0 / g.t3
    a[0, :] += c * out_row
    lhs = np.eye(dim) - 0.5 * h * a
    step_m = np.linalg.solve(lhs, np.eye(dim) + 0.5 * h * a)
    e0 = np.zeros(dim)
    e0[0] = 0.5 * h
    step_n = np.linalg.solve(lhs, e0)
    lo = np.array([-g.headroom_down for g in govs])
    hi = np.array([g.headroom_up for g in govs])
    iv = 1 + 2 * np.arange(ng)

    lost_r = _lost_power(cfg, t, "right")
    lost_l = _lost_power(cfg, t, "left")
    ffr = np.zeros(n_fine)
    t_trigger = None
    x = np.zeros(dim)
    states = np.zeros((n_fine, dim))
    limit = cfg.instability_limit
    for k in range(1, n_fine):
        drive = c * (ffr[k - 1] - lost_r[k - 1]) + c * (ffr[k] - lost_l[k])
        x_new = step_m @ x + step_n * drive
        if ng:
            x_new[iv] = np.clip(x_new[iv], lo, hi)
        if cfg.ffr is not None and t_trigger is None and x_new[0] <= -cfg.ffr.deadband:
            # linear interpolation of the crossing inside this step
            f0, f1 = x[0], x_new[0]
            frac = (-cfg.ffr.deadband - f0) / (f1 - f0) if f1 != f0 else 1.0
            t_trigger = t[k - 1] + frac * h
            ffr = cfg.ffr.power(t, t_trigger)
        if abs(x_new[0]) > limit:
            raise UnstableScenario(
                f"frequency deviation {x_new[0]:.3g} Hz at t={t[k]:.3f} s exceeds "
                f"+/-{limit:g} Hz"
            )
        x = x_new
        states[k] = x

    df = states[:, 0]
    ratios = np.array([g.t2 / g.t3 for g in govs])
    gov = ratios * states[:, 1::2] + (1.0 - ratios) * states[:, 2::2]
    rhs = c * (gov.sum(axis=1) + ffr - lost_r) - damp * df
    return t, df, gov, ffr, lost_r, rhs, t_trigger


def _artifact_signal(cfg: ScenarioConfig, t: np.ndarray) -> np.ndarray:
    art = cfg.artifacts
    rel = t - cfg.step_time
    after = rel >= 0
    sig = np.zeros_like(t)
    if art.oscillation_amplitude > 0:
        sig -= np.where(after, art.oscillation_amplitude
                        * np.exp(-art.oscillation_damping * np.maximum(rel, 0))
                        * np.sin(2 * np.pi * art.oscillation_frequency * rel), 0.0)
    if art.transient_amplitude > 0 and art.transient_duration > 0:
        inside = after & (rel <= art.transient_duration)
        sig -= np.where(inside, art.transient_amplitude
                        * np.sin(np.pi * rel / art.transient_duration), 0.0)
    return sig


def simulate_event(config: ScenarioConfig) -> SyntheticEvent:
    """Simulate a disturbance and package measured traces with clean truth.

    Raises :class:`UnstableScenario` when the frequency deviation leaves
    ``+/- config.instability_limit`` Hz.
    """
    cfg = config
    t_f, df_f, gov_f, ffr_f, lost_f, rhs_f, _ = _integrate(cfg)
    sel = slice(None, None, SUBSTEPS)
    t = t_f[sel]
    df, gov, ffr, lost, rhs = df_f[sel], gov_f[sel], ffr_f[sel], lost_f[sel], rhs_f[sel]

    rng = np.random.default_rng(cfg.seed)
    art = cfg.artifacts

    def trace(values, unit, cid):
        return UniformTrace(0.0, cfg.dt, values, unit=unit, channel_id=cid)

    def power_noise(n):
        if art.power_noise_sigma > 0:
            return rng.normal(0.0, art.power_noise_sigma, n)
        return np.zeros(n)

    freq_meas = cfg.f_n + df + _artifact_signal(cfg, t)
    if art.noise_sigma > 0:
        freq_meas = freq_meas + rng.normal(0.0, art.noise_sigma, t.size)

    channels, gov_traces, inertial_traces = [], [], []
    for i, g in enumerate(cfg.governors):
        cid = g.channel_id or f"G{i + 1}"
        inertial = -(2.0 * g.inertia / cfg.f_n) * rhs
        gov_traces.append(trace(gov[:, i], Unit.MW, cid))
        inertial_traces.append(trace(inertial, Unit.MW, cid))
        channels.append(trace(g.p0 + gov[:, i] + inertial + power_noise(t.size), Unit.MW, cid))
    ffr_trace = None
    if cfg.ffr is not None:
        ffr_trace = trace(ffr, Unit.MW, cfg.ffr.channel_id)
        channels.append(trace(ffr + power_noise(t.size), Unit.MW, cfg.ffr.channel_id))
    if not channels:
        # a fleet without governors still needs one (flat) PFR channel
        channels.append(trace(power_noise(t.size), Unit.MW, "G0"))
    cont = trace(cfg.p_cont - lost + power_noise(t.size), Unit.MW, "contingency")

    dataset = build_event_dataset(
        trace(freq_meas, Unit.HZ, "frequency"), channels, cont,
        f_n=cfg.f_n, p_load=cfg.p_load, onset=cfg.step_time,
    )
    truth = EventTruth(
        ke=cfg.ke_true,
        d=cfg.d_true,
        governor_total=trace(gov.sum(axis=1) if gov.size else np.zeros(t.size), Unit.MW,
                             "governor_total"),
        inertial_per_machine=tuple(inertial_traces),
        governor_per_machine=tuple(gov_traces),
        frequency=trace(cfg.f_n + df, Unit.HZ, "frequency_true"),
        rocof=trace(rhs, Unit.HZ, "rocof_true"),
        ffr=ffr_trace,
        lost_power=trace(lost, Unit.MW, "lost_power"),
        machine_inertia=cfg.machine_inertia,
    )
    return SyntheticEvent(dataset=dataset, truth=truth, config=cfg)


# -- export -------------------------------------------------------------------

def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def export_event(event: SyntheticEvent, directory, *, t_w: float = 0.06) -> str:
    """Write trace CSVs, ``manifest.json`` and ``truth.json`` to ``directory``.

    Returns the manifest path. The manifest carries a ``washout`` block with
    the machine inertias so the estimators can clean the PFR channels;
    ``truth.json`` is never read by the estimators.
    """
    ds = event.dataset
    try:
        os.makedirs(directory, exist_ok=True)
        entries = []

        def put(tr, fname, role=None):
            write_trace_csv(tr, os.path.join(directory, fname))
            if role is not None:
                entries.append({"path": fname, "role": role, "channel_id": tr.channel_id})
            return fname

        put(ds.frequency, "frequency.csv", "frequency")
        for tr in ds.pfr_channels:
            put(tr, f"pfr_{tr.channel_id}.csv", "pfr")
        put(ds.contingency, "contingency.csv", "contingency")

        inertias = {g.channel_id or f"G{i + 1}": g.inertia
                    for i, g in enumerate(event.config.governors)}
        for tr in ds.pfr_channels:
            inertias.setdefault(tr.channel_id, 0.0)
        manifest = {
            "f_n_hz": ds.f_n,
            "p_load_mw": ds.p_load,
            "onset_s": ds.onset_time,
            "traces": entries,
            "washout": {"t_w_s": t_w, "inertias_mws": inertias},
        }
        manifest_path = os.path.join(directory, "manifest.json")
        _write_json(manifest_path, manifest)

        truth = event.truth
        truth_files = {
            "frequency": put(truth.frequency, "truth_frequency.csv"),
            "governor_total": put(truth.governor_total, "truth_governor_total.csv"),
        }
        _write_json(os.path.join(directory, "truth.json"), {
            "ke_mws": truth.ke,
            "d_pct_per_hz": truth.d,
            "machine_inertia_mws": truth.machine_inertia,
            "files": truth_files,
        })
    except OSError as exc:
        raise IoFailure(f"cannot write event to {directory}: {exc}") from exc
    return manifest_path


# -- scenario presets ---------------------------------------------------------

def _fleet(ratings, inertias, p0s, **kw) -> tuple:
    # lead-lag of the common PSS/E TGOV1 parameter set
    kw.setdefault("t2", 3.0)
    kw.setdefault("t3", 10.0)
    return tuple(
        GovernorParams(rating=r, inertia=h, p0=p, channel_id=f"G{i + 1}", **kw)
        for i, (r, h, p) in enumerate(zip(ratings, inertias, p0s))
    )


def case1_analog(**overrides) -> ScenarioConfig:
    """Small islanded system: 85 MW trip of 315 MW load, KE 1522 MW.s, D 4 %/Hz."""
    base = dict(
        ke_true=1522.0, d_true=4.0, p_load=315.0, p_cont=85.0,
        governors=_fleet((250.0, 200.0, 150.0), (600.0, 420.0, 280.0), (120.0, 70.0, 40.0)),
    )
    base.update(overrides)
    return ScenarioConfig(**base)


def case2_analog(**overrides) -> ScenarioConfig:
    """Large interconnected system with an inter-area oscillation on the measurement."""
    base = dict(
        ke_true=78270.0, d_true=4.0, p_load=6097.0, p_cont=200.0,
        governors=_fleet((1500.0, 1200.0, 1000.0), (15000.0, 12000.0, 10000.0),
                         (900.0, 800.0, 700.0)),
        artifacts=Artifacts(oscillation_amplitude=0.02, oscillation_frequency=1.5,
                            oscillation_damping=0.3),
    )
    base.update(overrides)
    return ScenarioConfig(**base)


def case3_analog(**overrides) -> ScenarioConfig:
    """The :func:`case1_analog` system with a 30 MW battery providing FFR."""
    base = dict(ffr=FFRParams(capacity=30.0, deadband=0.1, delay=0.1, ramp_time=0.2))
    base.update(overrides)
    return case1_analog(**base)


def case5_analog(**overrides) -> ScenarioConfig:
    """Generator trip following a network fault: 150 ms transient on the frequency."""
    base = dict(
        ke_true=15000.0, d_true=2.0, p_load=1991.0, p_cont=231.0,
        governors=_fleet((900.0, 700.0, 500.0), (5000.0, 4000.0, 2612.0),
                         (500.0, 400.0, 300.0)),
        artifacts=Artifacts(transient_amplitude=0.02, transient_duration=0.15),
    )
    base.update(overrides)
    return ScenarioConfig(**base)
