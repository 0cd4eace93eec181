"""Inertia estimators.

Three methods are provided:

* sliding window: RoCoF from the steepest windowed difference quotient after
  onset, converted to inertia with the linearised swing equation;
* Inoue: RoCoF from the derivative at onset of a polynomial fitted to the
  post-onset frequency;
* model fitting: inertia ``KE`` and load relief ``D`` fitted jointly by
  matching a low-order system frequency response model to the measured
  frequency, driven by the measured PFR and contingency traces.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import legendre
from scipy.signal import lfilter

from .errors import (
    ConvergenceWarning,
    DegenerateHorizon,
    EmptySweep,
    EstimationError,
    HorizonOutOfRange,
    IllConditionedFit,
    InputError,
    InsufficientSamples,
    InvalidConfig,
    NegativeEstimate,
    NonPositiveInertia,
    WindowTooSmall,
    ZeroRocof,
)
from .timeseries import (
    EventDataset,
    UniformTrace,
    Unit,
    aggregate_pfr,
    contingency_deviation,
    pre_onset_mean,
)

__all__ = [
    "Method",
    "SwingEstimate",
    "ModelFitEstimate",
    "FitOptions",
    "SweepResult",
    "swing_inertia",
    "rocof_sliding_window",
    "estimate_sliding_window",
    "inoue_rocof",
    "estimate_inoue",
    "sfr_predict",
    "sfr_deviation",
    "fit_sfr",
    "fit_rmse",
    "sweep_window_lengths",
    "sweep_poly_orders",
]

DEFAULT_SEARCH_HORIZON = 2.0
DEFAULT_INOUE_HORIZON = 5.0
DEFAULT_FIT_HORIZON = 20.0
MAX_POLY_ORDER = 30


class Method(str, enum.Enum):
    SLIDING_WINDOW = "sliding_window"
    INOUE = "inoue"
    MODEL_FIT = "model_fit"


@dataclass(frozen=True)
class SwingEstimate:
    """Inertia from the linearised swing equation.

    ``hyperparameter`` is the window length in seconds (sliding window) or
    the polynomial order (Inoue).
    """

    ke: float
    rocof: float
    method: Method
    hyperparameter: float


@dataclass(frozen=True)
class FitOptions:
    horizon: float = DEFAULT_FIT_HORIZON
    d_max: float = 10.0
    tol: float = 1e-8
    max_iter: int = 200
    multistart: bool = True
    ke_bounds: tuple = (1.0, 1e7)
    scheme: str = "trapezoid"

    def __post_init__(self):
        if not self.horizon > 0:
            raise InvalidConfig("fit horizon must be positive")
        if not self.d_max >= 0:
            raise InvalidConfig("d_max must be >= 0")
        if self.max_iter < 1:
            raise InvalidConfig("max_iter must be >= 1")
        lo, hi = self.ke_bounds
        if not 0 < lo < hi:
            raise InvalidConfig("ke_bounds must satisfy 0 < low < high")
        if self.scheme not in _SCHEMES:
            raise InvalidConfig(f"scheme must be one of {sorted(_SCHEMES)}")

    @classmethod
    def from_dict(cls, data: dict) -> "FitOptions":
        keymap = {"horizon_s": "horizon", "d_max": "d_max", "tol": "tol",
                  "max_iter": "max_iter", "multistart": "multistart", "scheme": "scheme"}
        kwargs = {}
        for key, value in data.items():
            if key not in keymap:
                raise InvalidConfig(f"unknown fit option {key!r}")
            kwargs[keymap[key]] = value
        return cls(**kwargs)


@dataclass(frozen=True, eq=False)
class ModelFitEstimate:
    """Result of :func:`fit_sfr`.

    ``d`` is in %/Hz. ``rmse`` is in Hz over the fit horizon and
    ``fitted_frequency`` starts at the onset. ``starts`` lists
    ``(ke0, d0, rmse0)`` for each initial point tried.
    """

    ke: float
    d: float
    rmse: float
    fitted_frequency: UniformTrace
    iterations: int
    converged: bool
    termination: str = ""
    f_ref: float = 0.0
    starts: tuple = field(default=())


@dataclass(frozen=True)
class SweepResult:
    hyperparameter_values: tuple
    estimates: tuple
    method: Method

    @property
    def ke(self) -> np.ndarray:
        """Inertia per hyperparameter value, NaN where the estimate failed."""
        return np.array([e.ke if e is not None else np.nan for e in self.estimates])

    def __len__(self):
        return len(self.hyperparameter_values)


# -- linearised swing equation -------------------------------------------------

def swing_inertia(f_n: float, p_cont: float, rocof: float) -> float:
    """Inertia (MW.s) from ``KE = -(f_n / 2) * p_cont / rocof``.

    A generation loss (``p_cont > 0``) must come with a falling frequency.
    """
    if rocof == 0 or not math.isfinite(rocof):
        raise ZeroRocof(f"RoCoF is {rocof!r}; cannot estimate inertia")
    if p_cont == 0:
        raise InvalidConfig("contingency size is zero")
    ke = -(f_n / 2.0) * p_cont / rocof
    if not ke > 0:
        raise NegativeEstimate(
            f"RoCoF {rocof:+.4g} Hz/s has the same sign as the contingency "
            f"{p_cont:+.4g} MW; check the event direction"
        )
    return ke


def rocof_sliding_window(frequency: UniformTrace, onset: float, window: float,
                         search_horizon: float = DEFAULT_SEARCH_HORIZON,
                         direction: int = -1) -> float:
    """Steepest windowed difference quotient after onset (Hz/s).

    Evaluates ``(f[t] - f[t - window]) / window`` for every sample ``t`` in
    ``(onset, onset + search_horizon]`` and returns the most negative value
    (``direction=-1``, generation loss) or the most positive
    (``direction=+1``). The window is rounded to a whole number of samples.
    """
    dt = frequency.dt
    m = int(round(window / dt))
    if m < 2:
        raise WindowTooSmall(f"window {window} s is shorter than two samples (dt={dt})")
    if search_horizon <= window:
        raise HorizonOutOfRange("search horizon must exceed the window length")
    k0 = frequency.index_of(onset)
    h = int(round(search_horizon / dt))
    last = k0 + h
    if k0 < 0 or last > len(frequency) - 1:
        raise HorizonOutOfRange(
            f"search horizon {search_horizon} s after onset {onset} s exceeds the trace"
        )
    first = max(k0 + 1, m)
    if first > last:
        raise HorizonOutOfRange("no complete window inside the search horizon")
    f = frequency.values
    j = np.arange(first, last + 1)
    quot = (f[j] - f[j - m]) / (m * dt)
    return float(quot.min() if direction < 0 else quot.max())


def estimate_sliding_window(dataset: EventDataset, window: float,
                            search_horizon: float = DEFAULT_SEARCH_HORIZON) -> SwingEstimate:
    direction = -1 if dataset.p_cont_size > 0 else 1
    rocof = rocof_sliding_window(dataset.frequency, dataset.onset_time, window,
                                 search_horizon, direction)
    ke = swing_inertia(dataset.f_n, dataset.p_cont_size, rocof)
    return SwingEstimate(ke=ke, rocof=rocof, method=Method.SLIDING_WINDOW,
                         hyperparameter=float(window))


def inoue_rocof(frequency: UniformTrace, onset: float, order: int,
                fit_horizon: float = DEFAULT_INOUE_HORIZON,
                cond_limit: float = 1e8) -> float:
    """Derivative at onset of a least-squares polynomial fit (Hz/s).

    The fit uses a Legendre basis on time mapped from
    ``[onset, onset + fit_horizon]`` to ``[-1, 1]``, which stays well
    conditioned up to order 30 where a monomial basis does not.
    """
    if not 1 <= order <= MAX_POLY_ORDER:
        raise InvalidConfig(f"order must be in [1, {MAX_POLY_ORDER}], got {order}")
    dt = frequency.dt
    k0 = frequency.index_of(onset)
    n_steps = int(round(fit_horizon / dt))
    if k0 + n_steps > len(frequency) - 1:
        raise HorizonOutOfRange(f"fit horizon {fit_horizon} s exceeds the trace")
    n = n_steps + 1
    if n < 10 * (order + 1):
        raise InsufficientSamples(
            f"{n} samples in the fit horizon, need {10 * (order + 1)} for order {order}"
        )
    y = frequency.values[k0:k0 + n] - frequency.values[k0]
    span = n_steps * dt
    x = 2.0 * np.arange(n) / n_steps - 1.0
    vander = legendre.legvander(x, order)
    cond = np.linalg.cond(vander)
    if not cond <= cond_limit:
        raise IllConditionedFit(f"polynomial basis condition number {cond:.3g}")
    coef, *_ = np.linalg.lstsq(vander, y, rcond=None)
    slope = legendre.legval(-1.0, legendre.legder(coef))
    return float(slope * 2.0 / span)


def estimate_inoue(dataset: EventDataset, order: int,
                   fit_horizon: float = DEFAULT_INOUE_HORIZON) -> SwingEstimate:
    rocof = inoue_rocof(dataset.frequency, dataset.onset_time, order, fit_horizon)
    ke = swing_inertia(dataset.f_n, dataset.p_cont_size, rocof)
    return SwingEstimate(ke=ke, rocof=rocof, method=Method.INOUE,
                         hyperparameter=int(order))


# -- SFR model -----------------------------------------------------------------

def _euler(ke, d, p, pc, f_n, p_load, dt):
    c = f_n / (2.0 * ke)
    a = c * d / 100.0 * p_load
    u = c * (p - pc)
    drive = np.empty_like(u)
    drive[0] = 0.0
    drive[1:] = dt * u[:-1]
    return lfilter([1.0], [1.0, -(1.0 - a * dt)], drive)


def _trapezoid(ke, d, p, pc, f_n, p_load, dt):
    c = f_n / (2.0 * ke)
    a = c * d / 100.0 * p_load
    u = c * (p - pc)
    half = 0.5 * a * dt
    drive = np.empty_like(u)
    drive[0] = 0.0
    drive[1:] = 0.5 * dt * (u[:-1] + u[1:]) / (1.0 + half)
    return lfilter([1.0], [1.0, -(1.0 - half) / (1.0 + half)], drive)


_SCHEMES = {"euler": _euler, "trapezoid": _trapezoid}


def sfr_deviation(ke: float, d: float, pfr: np.ndarray, lost: np.ndarray, *,
                  f_n: float, p_load: float, dt: float,
                  scheme: str = "trapezoid") -> np.ndarray:
    """Frequency deviation of the SFR model from rest at sample 0.

    ``pfr`` and ``lost`` are the aggregate PFR and the lost power (MW), both
    zero before the event. ``scheme="euler"`` is the explicit recursion
    ``df[k] = df[k-1] + f_n/(2 KE) (p[k-1] - P[k-1] - D P_load df[k-1]) dt``;
    ``"trapezoid"`` integrates the same ODE with linearly interpolated
    inputs and is second-order accurate. ``d`` is in %/Hz.
    """
    if not ke > 0:
        raise NonPositiveInertia(f"KE must be positive, got {ke!r}")
    try:
        fn = _SCHEMES[scheme]
    except KeyError:
        raise InvalidConfig(f"unknown scheme {scheme!r}") from None
    return fn(ke, d, np.asarray(pfr, float), np.asarray(lost, float), f_n, p_load, dt)


def _horizon_samples(dataset: EventDataset, horizon: Optional[float]) -> int:
    k0 = dataset.onset_index
    avail = len(dataset.frequency) - 1 - k0
    if horizon is None:
        return avail
    return min(avail, int(math.floor(horizon / dataset.dt + 1e-9)))


def _model_inputs(dataset: EventDataset, n_steps: int):
    k0 = dataset.onset_index
    sl = slice(k0, k0 + n_steps + 1)
    return aggregate_pfr(dataset).values[sl], contingency_deviation(dataset).values[sl]


def sfr_predict(ke: float, d: float, dataset: EventDataset, *,
                horizon: Optional[float] = None,
                scheme: str = "trapezoid") -> UniformTrace:
    """Predicted frequency ``f_n + df`` from onset over ``horizon`` seconds.

    Driven by the dataset's aggregate PFR and contingency deviation; runs to
    the end of the trace when ``horizon`` is None.
    """
    n_steps = _horizon_samples(dataset, horizon)
    pfr, lost = _model_inputs(dataset, n_steps)
    df = sfr_deviation(ke, d, pfr, lost, f_n=dataset.f_n, p_load=dataset.p_load,
                       dt=dataset.dt, scheme=scheme)
    return UniformTrace(dataset.onset_time, dataset.dt, dataset.f_n + df, unit=Unit.HZ,
                        channel_id="sfr_predicted")


def fit_rmse(measured: np.ndarray, fitted: np.ndarray) -> float:
    """RMSE over all supplied samples (divides by the number of samples)."""
    diff = np.asarray(measured, float) - np.asarray(fitted, float)
    return float(np.sqrt(np.mean(diff * diff)))


def _initial_ke(dataset: EventDataset, lo: float, hi: float) -> float:
    for window in (0.1, 0.5):
        try:
            ke = estimate_sliding_window(dataset, window).ke
        except (EstimationError, InputError):
            continue
        return float(np.clip(ke, lo, hi))
    return float(np.clip(dataset.f_n * abs(dataset.p_cont_size) / 2.0, lo, hi))


class _Problem:
    """Residuals of the SFR model in ``z = (ln KE, D)``."""

    def __init__(self, meas, pfr, lost, dataset, options):
        self.meas = meas
        self.pfr = pfr
        self.lost = lost
        self.f_n = dataset.f_n
        self.p_load = dataset.p_load
        self.dt = dataset.dt
        self.scheme = options.scheme
        self.lo = np.array([math.log(options.ke_bounds[0]), 0.0])
        self.hi = np.array([math.log(options.ke_bounds[1]), options.d_max])
        self.n_eval = 0

    def clip(self, z):
        return np.minimum(np.maximum(z, self.lo), self.hi)

    def predict(self, z):
        self.n_eval += 1
        return sfr_deviation(math.exp(z[0]), z[1], self.pfr, self.lost, f_n=self.f_n,
                             p_load=self.p_load, dt=self.dt, scheme=self.scheme)

    def residual(self, z):
        return self.meas - self.predict(z)

    def jacobian(self, z, r):
        jac = np.empty((r.size, 2))
        for i, base in enumerate((1e-6, 1e-6 * max(1.0, abs(z[1])))):
            h = base if z[i] + base <= self.hi[i] else -base
            zh = z.copy()
            zh[i] += h
            jac[:, i] = (self.residual(zh) - r) / h
        return jac


def _levenberg_marquardt(prob: _Problem, z0, tol, max_iter):
    z = prob.clip(np.asarray(z0, float))
    r = prob.residual(z)
    cost = float(r @ r)
    lam = 1e-3
    for it in range(1, max_iter + 1):
        jac = prob.jacobian(z, r)
        grad = jac.T @ r
        hess = jac.T @ jac
        scale = np.diag(hess).copy()
        scale[scale <= 0] = 1e-12 * max(scale.max(), 1e-300)
        accepted = False
        while lam < 1e16:
            step = np.linalg.solve(hess + lam * np.diag(scale), -grad)
            z_new = prob.clip(z + step)
            if np.array_equal(z_new, z):
                lam *= 10.0
                continue
            r_new = prob.residual(z_new)
            cost_new = float(r_new @ r_new)
            if cost_new < cost:
                accepted = True
                lam = max(lam / 10.0, 1e-12)
                break
            lam *= 10.0
        if not accepted:
            return z, r, it, True, "stationary"
        rel = (math.sqrt(cost) - math.sqrt(cost_new)) / math.sqrt(cost)
        z, r, cost = z_new, r_new, cost_new
        if cost == 0.0 or rel < tol:
            return z, r, it, True, "tolerance"
    return z, r, max_iter, False, "max_iter"


def fit_sfr(dataset: EventDataset, fit_horizon: Optional[float] = None,
            options: Optional[FitOptions] = None) -> ModelFitEstimate:
    """Jointly fit inertia and load relief to the measured frequency.

    The PFR channels must already exclude machine inertial power (see
    :func:`inertiafit.preprocess.remove_inertial`), otherwise inertia is
    counted twice.

    The measured deviation is taken relative to the 100 ms pre-onset mean
    and compared with :func:`sfr_deviation` over the horizon (default
    ``options.horizon``, capped at the end of the trace). Minimisation is a
    bounded Levenberg-Marquardt (damped Gauss-Newton) iteration with
    forward-difference sensitivities in ``(ln KE, D)``, started from
    ``{0.5, 1, 2}`` times a coarse sliding-window estimate crossed with
    ``D`` in ``{0, 2, 4, 8}`` %/Hz. The start with the lowest RMSE wins, ties
    going to the lower ``KE``.

    If no start reaches the tolerance within ``max_iter`` iterations the
    best point is returned with ``converged=False`` and a
    :class:`ConvergenceWarning` is issued.
    """
    options = options or FitOptions()
    horizon = options.horizon if fit_horizon is None else fit_horizon
    n_steps = _horizon_samples(dataset, horizon)
    if n_steps + 1 < 50:
        raise DegenerateHorizon(f"fit horizon has {n_steps + 1} samples, need at least 50")
    k0 = dataset.onset_index
    f_ref = pre_onset_mean(dataset.frequency, dataset.onset_time, dataset.pre_window)
    meas = dataset.frequency.values[k0:k0 + n_steps + 1] - f_ref
    pfr, lost = _model_inputs(dataset, n_steps)
    prob = _Problem(meas, pfr, lost, dataset, options)

    lo, hi = options.ke_bounds
    ke0 = _initial_ke(dataset, lo, hi)
    if options.multistart:
        starts = [(ke0 * m, min(d0, options.d_max))
                  for m in (0.5, 1.0, 2.0) for d0 in (0.0, 2.0, 4.0, 8.0)]
    else:
        starts = [(ke0, min(4.0, options.d_max))]

    results = []
    start_info = []
    for ke_s, d_s in starts:
        z0 = prob.clip(np.array([math.log(ke_s), d_s]))
        r0 = prob.residual(z0)
        start_info.append((math.exp(z0[0]), float(z0[1]), math.sqrt(float(r0 @ r0) / r0.size)))
        z, r, iters, conv, why = _levenberg_marquardt(prob, z0, options.tol, options.max_iter)
        results.append((math.sqrt(float(r @ r) / r.size), math.exp(z[0]), z, r, iters, conv, why))

    best = min(results, key=lambda item: (item[0], item[1]))
    _, ke, z, r, iters, converged, why = best
    fitted = f_ref + prob.predict(z)
    rmse = fit_rmse(dataset.frequency.values[k0:k0 + n_steps + 1], fitted)
    if not converged:
        warnings.warn(f"model fit hit max_iter={options.max_iter}; returning best point",
                      ConvergenceWarning, stacklevel=2)
    return ModelFitEstimate(
        ke=ke,
        d=float(z[1]),
        rmse=rmse,
        fitted_frequency=UniformTrace(dataset.onset_time, dataset.dt, fitted, unit=Unit.HZ,
                                      channel_id="sfr_fitted"),
        iterations=iters,
        converged=converged,
        termination=why,
        f_ref=f_ref,
        starts=tuple(start_info),
    )


# -- sweeps --------------------------------------------------------------------

def _check_sweep(values):
    values = tuple(values)
    if not values:
        raise EmptySweep("hyperparameter sequence is empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise InvalidConfig("hyperparameter values must be strictly increasing")
    return values


def sweep_window_lengths(dataset: EventDataset, windows: Sequence[float],
                         search_horizon: float = DEFAULT_SEARCH_HORIZON) -> SweepResult:
    """Sliding-window estimate per window length; failed points are ``None``."""
    windows = _check_sweep(windows)
    out = []
    for w in windows:
        try:
            out.append(estimate_sliding_window(dataset, w, search_horizon))
        except (EstimationError, InputError):
            out.append(None)
    return SweepResult(windows, tuple(out), Method.SLIDING_WINDOW)


def sweep_poly_orders(dataset: EventDataset, orders: Sequence[int],
                      fit_horizon: float = DEFAULT_INOUE_HORIZON) -> SweepResult:
    """Inoue estimate per polynomial order; failed points are ``None``."""
    orders = _check_sweep([int(o) for o in orders])
    out = []
    for order in orders:
        try:
            out.append(estimate_inoue(dataset, order, fit_horizon))
        except (EstimationError, InputError):
            out.append(None)
    return SweepResult(orders, tuple(out), Method.INOUE)
