"""Uniformly sampled traces and event datasets.

A measured disturbance is described by one frequency trace, any number of
generator (or interruptible load) power traces that together form the
system primary frequency response, and the power trace of the element that
tripped. :func:`build_event_dataset` aligns them on a common grid and
derives the contingency size.
"""
from __future__ import annotations

import csv
import enum
import math
import os
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .errors import (
    InsufficientOverlap,
    InvalidConfig,
    InvalidStep,
    MissingColumn,
    NonFiniteValue,
    NonMonotonicTime,
    NonUniformSampling,
    OnsetNotFound,
    TooFewSamples,
    TraceFileNotFound,
)

__all__ = [
    "Unit",
    "UniformTrace",
    "EventDataset",
    "load_trace_csv",
    "write_trace_csv",
    "resample",
    "build_event_dataset",
    "aggregate_pfr",
    "contingency_deviation",
    "detect_onset",
    "pre_onset_mean",
]

#: relative jitter tolerated when a CSV time column is treated as uniform
UNIFORM_JITTER = 1e-6
#: grid times closer than this fraction of dt are treated as coincident
_GRID_RTOL = 1e-9

PathLike = Union[str, "os.PathLike[str]"]


class Unit(str, enum.Enum):
    HZ = "Hz"
    MW = "MW"


@dataclass(frozen=True, eq=False)
class UniformTrace:
    """Scalar signal on a uniform time grid.

    ``values[k]`` is sampled at ``start_time + k * dt``. The array is stored
    read-only so traces can be shared freely.
    """

    start_time: float
    dt: float
    values: np.ndarray
    unit: Unit = Unit.MW
    channel_id: str = ""

    def __post_init__(self):
        dt = float(self.dt)
        if not (math.isfinite(dt) and dt > 0):
            raise InvalidStep(f"dt must be positive and finite, got {self.dt!r}")
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size < 2:
            raise TooFewSamples(
                f"trace {self.channel_id!r} has {values.size} samples, need at least 2"
            )
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise NonFiniteValue(
                f"trace {self.channel_id!r} has a non-finite value at sample {bad}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "dt", dt)
        object.__setattr__(self, "start_time", float(self.start_time))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "unit", Unit(self.unit))

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, UniformTrace):
            return NotImplemented
        return (
            self.start_time == other.start_time
            and self.dt == other.dt
            and self.unit == other.unit
            and self.channel_id == other.channel_id
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    @property
    def times(self) -> np.ndarray:
        return self.start_time + self.dt * np.arange(self.values.size)

    @property
    def end_time(self) -> float:
        return self.start_time + self.dt * (self.values.size - 1)

    def index_of(self, t: float) -> int:
        """Index of the sample nearest to time ``t``."""
        return int(round((t - self.start_time) / self.dt))

    def time_of(self, k: int) -> float:
        return self.start_time + self.dt * k

    def on_grid(self, start_time: float, dt: float, n: int) -> bool:
        tol = _GRID_RTOL * dt
        return (
            self.values.size == n
            and abs(self.dt - dt) <= _GRID_RTOL * dt
            and abs(self.start_time - start_time) <= tol
        )

    def with_values(self, values, **changes) -> "UniformTrace":
        return replace(self, values=values, **changes)


# -- CSV -----------------------------------------------------------------------

def _read_csv_rows(path):
    meta = {}
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        lines = []
        for line in fh:
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                key, sep, val = stripped[1:].partition(":")
                if sep:
                    meta[key.strip()] = val.strip()
                continue
            lines.append(line)
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None:
        raise TooFewSamples(f"{path}: no header row")
    header = [h.strip() for h in header]
    for row in reader:
        rows.append(row)
    return header, rows, meta


def load_trace_csv(
    path: PathLike,
    column_spec: Optional[Mapping[str, str]] = None,
    *,
    unit: Optional[Union[Unit, str]] = None,
    channel_id: Optional[str] = None,
    dt: Optional[float] = None,
) -> UniformTrace:
    """Read a two-column trace CSV.

    Parameters
    ----------
    path : path-like
        CSV file with a header row. Lines starting with ``#`` are comments;
        comments of the form ``# key: value`` are read as metadata (``unit``
        and ``channel_id`` are honoured).
    column_spec : mapping, optional
        Column name to role (``"time"`` or ``"value"``). Defaults to
        ``{"time_s": "time", "value": "value"}``.
    unit, channel_id : optional
        Override the metadata found in the file.
    dt : float, optional
        Resample onto this step by linear interpolation. Required when the
        time column is not uniform to within a relative jitter of 1e-6.

    Returns
    -------
    UniformTrace
    """
    if not os.path.exists(path):
        raise TraceFileNotFound(f"trace file not found: {os.fspath(path)}")
    column_spec = dict(column_spec or {"time_s": "time", "value": "value"})
    by_role = {role: name for name, role in column_spec.items()}
    for role in ("time", "value"):
        if role not in by_role:
            raise InvalidConfig(f"column_spec has no column for role {role!r}")

    header, rows, meta = _read_csv_rows(path)
    idx = {}
    for role in ("time", "value"):
        name = by_role[role]
        if name not in header:
            raise MissingColumn(f"{os.fspath(path)}: missing column {name!r}")
        idx[role] = header.index(name)

    if len(rows) < 2:
        raise TooFewSamples(f"{os.fspath(path)}: {len(rows)} data rows, need at least 2")
    try:
        t = np.array([float(r[idx["time"]]) for r in rows])
        v = np.array([float(r[idx["value"]]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise NonFiniteValue(f"{os.fspath(path)}: unparseable row ({exc})") from None
    if not np.all(np.isfinite(t)):
        raise NonFiniteValue(f"{os.fspath(path)}: non-finite time stamp")

    steps = np.diff(t)
    if np.any(steps <= 0):
        k = int(np.flatnonzero(steps <= 0)[0]) + 1
        raise NonMonotonicTime(f"{os.fspath(path)}: time does not increase at row {k}")

    unit = unit if unit is not None else meta.get("unit", Unit.MW)
    channel_id = channel_id if channel_id is not None else meta.get(
        "channel_id", os.path.splitext(os.path.basename(os.fspath(path)))[0]
    )
    mean_step = (t[-1] - t[0]) / (t.size - 1)
    uniform = np.max(np.abs(steps - mean_step)) <= UNIFORM_JITTER * mean_step
    if dt is None:
        if not uniform:
            raise NonUniformSampling(
                f"{os.fspath(path)}: time column is not uniform; pass dt= to resample"
            )
        return UniformTrace(t[0], mean_step, v, unit=unit, channel_id=channel_id)
    if dt <= 0:
        raise InvalidStep(f"dt must be positive, got {dt}")
    n = int(math.floor((t[-1] - t[0]) / dt + 1e-9)) + 1
    grid = np.minimum(t[0] + dt * np.arange(n), t[-1])
    if not np.all(np.isfinite(v)):
        raise NonFiniteValue(f"{os.fspath(path)}: non-finite value")
    return UniformTrace(t[0], dt, np.interp(grid, t, v), unit=unit, channel_id=channel_id)


def write_trace_csv(trace: UniformTrace, path: PathLike) -> None:
    """Write ``trace`` in the format read by :func:`load_trace_csv`.

    Floats are written with ``repr`` so values round-trip exactly.
    """
    times = trace.times
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# channel_id: {trace.channel_id}\n")
        fh.write(f"# unit: {trace.unit.value}\n")
        fh.write("time_s,value\n")
        for t, v in zip(times.tolist(), trace.values.tolist()):
            fh.write(f"{t!r},{v!r}\n")


# -- resampling ----------------------------------------------------------------

def _grid_count(span: float, dt: float) -> int:
    return int(math.floor(span / dt + 1e-9)) + 1


def _to_grid(trace: UniformTrace, start: float, dt: float, n: int) -> UniformTrace:
    if trace.on_grid(start, dt, n):
        if trace.start_time == start and trace.dt == dt:
            return trace
        return replace(trace, start_time=start, dt=dt)
    grid = start + dt * np.arange(n)
    values = np.interp(grid, trace.times, trace.values)
    return UniformTrace(start, dt, values, unit=trace.unit, channel_id=trace.channel_id)


def resample(trace: UniformTrace, dt_new: float) -> UniformTrace:
    """Linearly interpolate ``trace`` onto a grid with step ``dt_new``.

    The new grid starts at the original start time and covers as much of the
    original span as whole steps allow. The first sample, and the last one
    when the span is a multiple of ``dt_new``, are copied exactly.
    """
    if not (dt_new > 0 and math.isfinite(dt_new)):
        raise InvalidStep(f"dt_new must be positive, got {dt_new!r}")
    span = trace.end_time - trace.start_time
    n = _grid_count(span, dt_new)
    if n < 2:
        raise TooFewSamples(f"dt_new={dt_new} leaves fewer than 2 samples")
    grid = np.minimum(trace.start_time + dt_new * np.arange(n), trace.end_time)
    values = np.interp(grid, trace.times, trace.values)
    values[0] = trace.values[0]
    if abs(grid[-1] - trace.end_time) <= _GRID_RTOL * dt_new * max(1, n):
        values[-1] = trace.values[-1]
    return UniformTrace(trace.start_time, dt_new, values, unit=trace.unit,
                        channel_id=trace.channel_id)


# -- onset / contingency size --------------------------------------------------

def detect_onset(contingency: UniformTrace, *, floor: float = 5.0,
                 fraction: float = 0.5) -> float:
    """Time of the contingency.

    Returns the time of the first sample whose backward difference exceeds
    ``fraction`` of the largest single-step change in the trace. Raises
    :class:`OnsetNotFound` if no step is larger than ``floor`` (MW).
    """
    steps = np.abs(np.diff(contingency.values))
    largest = float(steps.max())
    if largest < floor:
        raise OnsetNotFound(
            f"largest step in {contingency.channel_id!r} is {largest:.3g}, "
            f"below the {floor:g} floor"
        )
    k = int(np.flatnonzero(steps > fraction * largest)[0]) + 1
    return contingency.time_of(k)


def _window(trace: UniformTrace, onset: float, offset: float, width: float) -> slice:
    k0 = trace.index_of(onset)
    start = k0 + int(round(offset / trace.dt))
    m = max(1, int(round(width / trace.dt)))
    lo, hi = max(start, 0), min(start + m, len(trace))
    if hi <= lo:
        raise InsufficientOverlap(
            f"window [{offset:+g} s, {offset + width:+g} s] around onset lies outside "
            f"trace {trace.channel_id!r}"
        )
    return slice(lo, hi)


def pre_onset_mean(trace: UniformTrace, onset: float, window: float = 0.1) -> float:
    """Mean of the samples in ``[onset - window, onset)``."""
    return float(np.mean(trace.values[_window(trace, onset, -window, window)]))


def contingency_size(contingency: UniformTrace, onset: float, *, pre_window: float = 0.1,
                     settle_delay: float = 0.2, settle_window: float = 0.1) -> float:
    """Pre-onset mean minus the settled post-onset mean of the tripped element."""
    pre = pre_onset_mean(contingency, onset, pre_window)
    post = float(np.mean(contingency.values[
        _window(contingency, onset, settle_delay, settle_window)]))
    return pre - post


# -- event dataset -------------------------------------------------------------

@dataclass(frozen=True)
class EventDataset:
    """Aligned traces and metadata for one disturbance.

    All traces share start time, step and length. ``p_cont_size`` is the
    lost power (MW, positive for a generation loss).
    """

    frequency: UniformTrace
    pfr_channels: tuple
    contingency: UniformTrace
    f_n: float
    p_load: float
    p_cont_size: float
    onset_time: float
    pre_window: float = 0.1
    settle_delay: float = 0.2
    settle_window: float = 0.1
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "pfr_channels", tuple(self.pfr_channels))
        ref = self.frequency
        for tr in (*self.pfr_channels, self.contingency):
            if not tr.on_grid(ref.start_time, ref.dt, len(ref)):
                raise InsufficientOverlap(
                    f"trace {tr.channel_id!r} is not aligned with the frequency trace"
                )
        if not self.pfr_channels:
            raise InvalidConfig("at least one PFR channel is required")
        for name in ("f_n", "p_load", "p_cont_size"):
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"{name} must be positive, got {getattr(self, name)!r}")
        if not ref.start_time <= self.onset_time <= ref.end_time:
            raise InvalidConfig(f"onset {self.onset_time} outside the trace span")

    @property
    def dt(self) -> float:
        return self.frequency.dt

    @property
    def onset_index(self) -> int:
        return self.frequency.index_of(self.onset_time)

    @property
    def times(self) -> np.ndarray:
        return self.frequency.times

    def channel(self, channel_id: str) -> UniformTrace:
        for tr in self.pfr_channels:
            if tr.channel_id == channel_id:
                return tr
        raise KeyError(channel_id)

    def replace_channels(self, pfr_channels: Sequence[UniformTrace]) -> "EventDataset":
        return replace(self, pfr_channels=tuple(pfr_channels))


def build_event_dataset(
    frequency: UniformTrace,
    pfr_channels: Sequence[UniformTrace],
    contingency: UniformTrace,
    f_n: float,
    p_load: float,
    onset: Union[float, str, None] = "auto",
    *,
    min_post_onset: float = 5.0,
    pre_window: float = 0.1,
    settle_delay: float = 0.2,
    settle_window: float = 0.1,
    onset_floor: float = 5.0,
) -> EventDataset:
    """Align traces on a common grid and derive the contingency size.

    The common step is the coarsest among the inputs and the grid covers the
    interval where every trace has data. ``onset`` may be a time or
    ``"auto"``/``None`` to detect it from the contingency trace; either way
    it is snapped to the nearest grid sample.
    """
    traces = [frequency, *pfr_channels, contingency]
    dt = max(tr.dt for tr in traces)
    start = max(tr.start_time for tr in traces)
    end = min(tr.end_time for tr in traces)
    if end - start < dt:
        raise InsufficientOverlap("traces do not overlap in time")
    n = _grid_count(end - start, dt)
    aligned = [_to_grid(tr, start, dt, n) for tr in traces]
    freq, pfr, cont = aligned[0], aligned[1:-1], aligned[-1]

    if onset is None or (isinstance(onset, str) and onset.lower() == "auto"):
        onset_t = detect_onset(cont, floor=onset_floor)
    else:
        onset_t = float(onset)
        if not (start - 0.5 * dt <= onset_t <= end + 0.5 * dt):
            raise InsufficientOverlap(f"onset {onset_t} s outside the common span "
                                      f"[{start}, {end}]")
        onset_t = freq.time_of(freq.index_of(onset_t))
    if freq.index_of(onset_t) < 1:
        raise InsufficientOverlap("no pre-onset samples in the common span")
    if end - onset_t < min_post_onset - 1e-9:
        raise InsufficientOverlap(
            f"traces overlap for {end - onset_t:.3g} s after onset, need {min_post_onset:g} s"
        )

    p_cont = contingency_size(cont, onset_t, pre_window=pre_window,
                              settle_delay=settle_delay, settle_window=settle_window)
    return EventDataset(
        frequency=freq,
        pfr_channels=tuple(pfr),
        contingency=cont,
        f_n=float(f_n),
        p_load=float(p_load),
        p_cont_size=p_cont,
        onset_time=onset_t,
        pre_window=pre_window,
        settle_delay=settle_delay,
        settle_window=settle_window,
    )


def aggregate_pfr(dataset: EventDataset) -> UniformTrace:
    """Sum of the PFR channels, re-based so the pre-onset mean is zero."""
    total = np.zeros(len(dataset.frequency))
    for tr in dataset.pfr_channels:
        total = total + tr.values
    ref = dataset.frequency
    agg = UniformTrace(ref.start_time, ref.dt, total, unit=Unit.MW, channel_id="pfr_total")
    base = pre_onset_mean(agg, dataset.onset_time, dataset.pre_window)
    return agg.with_values(total - base)


def contingency_deviation(dataset: EventDataset) -> UniformTrace:
    """Lost power relative to the pre-onset level (0 before, about +p_cont_size after)."""
    cont = dataset.contingency
    base = pre_onset_mean(cont, dataset.onset_time, dataset.pre_window)
    return cont.with_values(base - cont.values, channel_id="contingency_lost")
