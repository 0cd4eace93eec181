"""Removal of inertial power from generator traces, plus smoothing.

The electrical output of a synchronous machine after a disturbance is the
sum of its governor response and its inertial response. The inertial part
is estimated from the measured frequency with a washout filter
``s / (1 + t_w s)`` scaled by ``2 KE_i / f_n`` and subtracted.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidConfig, InvalidTimeConstant, UnknownChannel, WindowTooSmall
from .timeseries import UniformTrace, Unit

__all__ = [
    "DEFAULT_T_W",
    "WashoutConfig",
    "washout_derivative",
    "inertial_component",
    "remove_inertial",
    "remove_inertial_all",
    "moving_average",
]

DEFAULT_T_W = 0.06


@dataclass(frozen=True)
class WashoutConfig:
    f_n: float
    generator_inertias: Mapping[str, float] = field(default_factory=dict)
    t_w: float = DEFAULT_T_W

    def __post_init__(self):
        if not self.t_w > 0:
            raise InvalidTimeConstant(f"t_w must be positive, got {self.t_w!r}")
        if not self.f_n > 0:
            raise InvalidConfig(f"f_n must be positive, got {self.f_n!r}")
        for ch, ke in self.generator_inertias.items():
            if not ke >= 0:
                raise InvalidConfig(f"inertia for {ch!r} must be >= 0, got {ke!r}")
        object.__setattr__(self, "generator_inertias", dict(self.generator_inertias))


def washout_derivative(x: np.ndarray, dt: float, t_w: float) -> np.ndarray:
    """Backward-difference washout ``s/(1 + t_w s)`` applied to ``x``.

    Discretised as ``y[k] = (t_w y[k-1] + x[k] - x[k-1]) / (t_w + dt)`` with
    ``y[0] = 0`` and ``x[-1] = x[0]``, i.e. the filter starts at rest.
    """
    if not t_w > 0:
        raise InvalidTimeConstant(f"t_w must be positive, got {t_w!r}")
    x = np.asarray(x, dtype=float)
    dx = np.diff(x, prepend=x[0])
    denom = t_w + dt
    return lfilter([1.0 / denom], [1.0, -t_w / denom], dx)


def inertial_component(frequency: UniformTrace, ke_i: float, f_n: float,
                       t_w: float = DEFAULT_T_W) -> UniformTrace:
    """Estimated inertial power (MW) of a machine with stored energy ``ke_i``.

    A falling frequency gives a positive (injected) inertial power.
    """
    if ke_i < 0:
        raise InvalidConfig(f"ke_i must be >= 0, got {ke_i!r}")
    y = washout_derivative(frequency.values, frequency.dt, t_w)
    power = -(2.0 * ke_i / f_n) * y
    return UniformTrace(frequency.start_time, frequency.dt, power, unit=Unit.MW,
                        channel_id=f"inertial:{ke_i:g}")


def remove_inertial(pfr_channel: UniformTrace, frequency: UniformTrace,
                    config: WashoutConfig) -> UniformTrace:
    """Subtract the machine's estimated inertial power from its output trace.

    Applying this twice subtracts the inertial estimate twice; callers are
    expected to clean each channel once.
    """
    try:
        ke_i = config.generator_inertias[pfr_channel.channel_id]
    except KeyError:
        raise UnknownChannel(
            f"no inertia configured for channel {pfr_channel.channel_id!r}"
        ) from None
    if ke_i == 0:
        return pfr_channel
    inertial = inertial_component(frequency, ke_i, config.f_n, config.t_w)
    return pfr_channel.with_values(pfr_channel.values - inertial.values)


def remove_inertial_all(dataset, config: WashoutConfig):
    """Dataset with every PFR channel cleaned by :func:`remove_inertial`."""
    cleaned = [remove_inertial(ch, dataset.frequency, config) for ch in dataset.pfr_channels]
    return dataset.replace_channels(cleaned)


def moving_average(trace: UniformTrace, window: float) -> UniformTrace:
    """Centred moving average over ``window`` seconds.

    The window holds ``round(window / dt)`` samples, rounded up to an odd
    count so that it is centred. Near the ends the window shrinks
    symmetrically rather than padding.
    """
    dt = trace.dt
    if window < dt * (1 - 1e-9):
        raise WindowTooSmall(f"window {window} s is shorter than dt={dt} s")
    half = int(round(window / dt)) // 2
    x = trace.values
    n = x.size
    if half == 0:
        return trace
    csum = np.concatenate(([0.0], np.cumsum(x)))
    k = np.arange(n)
    h = np.minimum(half, np.minimum(k, n - 1 - k))
    out = (csum[k + h + 1] - csum[k - h]) / (2 * h + 1)
    return trace.with_values(out)
