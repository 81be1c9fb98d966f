"""Synthetic four-wire R(T) transition curves and midpoint extraction."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, logit

from .model import FilmParams, SignalModel, cavity_field

SeedLike = Union[int, Sequence[int], np.random.SeedSequence]

# 10%-90% span of the logistic in units of its scale parameter
LOGISTIC_10_90 = 2.0 * math.log(9.0)


class ExtractionError(ValueError):
    """No usable transition in a resistance sweep."""


@dataclass(frozen=True)
class ApparatusParams:
    """Read-out characteristics. Defaults are those of the 300 nm Al test film.

    Resistances in milliohm, width in millikelvin, coil constant in G/mA.
    ``lockin_hz`` and ``probe_current_ua`` are recorded metadata only.
    """

    r_normal: float = 24.0
    r_residual: float = 1.0
    width: float = 10.0
    noise_sigma: float = 1.0
    coil_constant: float = 1.1
    current_rel_err: float = 1e-3
    lockin_hz: float = 6.0
    probe_current_ua: float = 10.0

    def __post_init__(self):
        if not self.r_normal > self.r_residual >= 0:
            raise ValueError("need r_normal > r_residual >= 0")
        if not self.width > 0:
            raise ValueError("transition width must be > 0")
        if self.noise_sigma < 0 or self.current_rel_err < 0:
            raise ValueError("noise levels must be >= 0")
        if not self.coil_constant > 0:
            raise ValueError("coil_constant must be > 0")

    @property
    def logistic_scale_k(self) -> float:
        """Logistic scale [K] giving the configured 10%-90% width."""
        return self.width * 1e-3 / LOGISTIC_10_90

    def replace(self, **changes) -> "ApparatusParams":
        values = asdict(self)
        values.update(changes)
        return ApparatusParams(**values)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ApparatusParams":
        known = {k: float(v) for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


class TransitionRecord(NamedTuple):
    temperature: float  # K
    field: float  # G
    resistance: float  # mOhm


def field_from_current(a: ApparatusParams, current: float) -> tuple[float, float]:
    """Coil field [G] for ``current`` [mA], with the relative setting error."""
    if current < 0:
        raise ValueError("coil current must be >= 0")
    return a.coil_constant * current, a.current_rel_err


def transition_temperature(p: FilmParams, s: SignalModel, field: float) -> float:
    """Temperature [K] at which the (cavity) critical field equals ``field``."""
    if field < 0:
        raise ValueError("applied field must be >= 0")
    if field == 0:
        return p.t_c
    h0 = float(cavity_field(p, 0.0, s, validate=False))
    if field >= h0:
        raise ValueError(f"field {field:.6g} G exceeds the zero-temperature critical field {h0:.6g} G")

    def excess(t):
        return float(cavity_field(p, t, s, validate=False)) - field

    t_star = brentq(excess, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return t_star * p.t_c


def resistance_profile(t_mid: float, a: ApparatusParams, temperatures: np.ndarray) -> np.ndarray:
    """Noiseless logistic R(T) [mOhm] stepping at ``t_mid`` [K]."""
    x = (np.asarray(temperatures, dtype=float) - t_mid) / a.logistic_scale_k
    return a.r_residual + (a.r_normal - a.r_residual) * expit(x)


def transition_curve(
    p: FilmParams,
    s: SignalModel,
    a: ApparatusParams,
    field: float,
    t_grid: Sequence[float],
    seed: SeedLike,
) -> list[TransitionRecord]:
    """Simulate one fixed-field temperature sweep.

    The coil error is drawn once per curve as a multiplicative field offset,
    then independent Gaussian read-out noise is added per sample. Records
    carry the nominal (requested) field.
    """
    temps = np.asarray(t_grid, dtype=float)
    if temps.ndim != 1 or temps.size == 0:
        raise ValueError("t_grid must be a nonempty 1-D sequence")
    if np.any(np.diff(temps) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if field < 0:
        raise ValueError("applied field must be >= 0")
    rng = np.random.default_rng(seed)
    offset = rng.normal(0.0, a.current_rel_err) if a.current_rel_err > 0 else 0.0
    t_mid = transition_temperature(p, s, field * (1.0 + offset))
    r = resistance_profile(t_mid, a, temps)
    if a.noise_sigma > 0:
        r = r + rng.normal(0.0, a.noise_sigma, temps.size)
    return [TransitionRecord(float(T), float(field), float(R)) for T, R in zip(temps, r)]


def _wls_line(x, y, w):
    """Weighted line y = a + b (x - xbar); returns a, b, xbar, var_a, var_b for unit-variance weights."""
    sw = w.sum()
    xbar = (w * x).sum() / sw
    dx = x - xbar
    sxx = (w * dx * dx).sum()
    a = (w * y).sum() / sw
    b = (w * dx * y).sum() / sxx
    return a, b, xbar, 1.0 / sw, 1.0 / sxx


def extract_transition(
    records: Sequence[TransitionRecord],
    noise_sigma: float | None = None,
    *,
    fraction: float = 0.5,
    window: tuple[float, float] = (0.15, 0.85),
    plateau_fraction: float = 0.1,
) -> tuple[float, float]:
    """Temperature where R crosses ``fraction`` of the step, with its 1-sigma error.

    Plateaus are the means of the first and last ``plateau_fraction`` of the
    sweep. The crossing comes from a weighted straight-line fit of the
    logit-normalised resistance over the samples inside ``window`` of the
    step, which is exact for a noiseless logistic step. The error combines
    the line-fit covariance with the plateau-level uncertainty, both driven
    by ``noise_sigma`` (estimated from plateau scatter when not given).

    Returns
    -------
    (temperature, uncertainty) in kelvin.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    lo_w, hi_w = window
    if not 0 < lo_w < fraction < hi_w < 1:
        raise ValueError("window must bracket the crossing fraction inside (0, 1)")
    recs = sorted(records, key=lambda r: r.temperature)
    n = len(recs)
    if n < 8:
        raise ExtractionError("need at least 8 samples")
    T = np.array([r.temperature for r in recs])
    R = np.array([r.resistance for r in recs])

    k = max(3, int(n * plateau_fraction))
    low, high = R[:k], R[-k:]
    r_low, r_high = low.mean(), high.mean()
    if noise_sigma is None:
        noise_sigma = math.sqrt(0.5 * (low.var(ddof=1) + high.var(ddof=1)))
    span = r_high - r_low
    if span <= 0:
        raise ExtractionError("no crossing: resistance does not rise across the sweep")
    if span < 4.0 * noise_sigma:
        raise ExtractionError(f"plateaus indistinguishable: step {span:.3g} < 4 x noise {noise_sigma:.3g}")
    y = (R - r_low) / span
    if not (np.any(y < fraction) and np.any(y > fraction)):
        raise ExtractionError("no crossing of the transition level")

    target = logit(fraction)
    lo_l, hi_l = logit(lo_w), logit(hi_w)

    # first pass: select on the measured values
    sel = (y > lo_w) & (y < hi_w)
    if sel.sum() < 2:
        # too steep for the sampling: interpolate across the bracketing pair
        i = int(np.argmax(y > fraction))
        if i == 0:
            raise ExtractionError("no crossing of the transition level")
        sel = np.zeros(n, dtype=bool)
        sel[i - 1 : i + 1] = True
        yy = np.clip(y[sel], 1e-6, 1 - 1e-6)
        z = logit(yy)
        b = (z[1] - z[0]) / (T[sel][1] - T[sel][0])
        t_x = T[sel][0] + (target - z[0]) / b
        slope_r = b * fraction * (1 - fraction) * span
        return float(t_x), float(noise_sigma / abs(slope_r)) if slope_r != 0 else math.inf

    yy = np.clip(y[sel], 1e-6, 1 - 1e-6)
    a, b, xbar, _, _ = _wls_line(T[sel], logit(yy), (yy * (1 - yy)) ** 2)
    if b <= 0:
        raise ExtractionError("transition slope is not positive")

    # refine in resistance space, where the noise is Gaussian and uniform; the
    # logit of a noisy sample near the window edge is not
    t_x, b = xbar + (target - a) / b, b
    cov = None
    for _ in range(20):
        z = target + b * (T - t_x)
        sel = (z > lo_l) & (z < hi_l)
        if sel.sum() < 3:
            break
        yhat = expit(z[sel])
        d = yhat * (1 - yhat)
        J = np.column_stack([-b * d, (T[sel] - t_x) * d])
        res = y[sel] - yhat
        JtJ = J.T @ J
        try:
            step = np.linalg.solve(JtJ, J.T @ res)
        except np.linalg.LinAlgError:
            break
        t_x, b = t_x + step[0], b + step[1]
        cov = JtJ
        if abs(step[0]) < 1e-12 * max(abs(t_x), 1.0) and abs(step[1]) < 1e-10 * abs(b):
            break
    if b <= 0:
        raise ExtractionError("transition slope is not positive")

    sigma_y = noise_sigma / span
    var_fit = 0.0
    if cov is not None:
        var_fit = sigma_y**2 * float(np.linalg.inv(cov)[0, 0])
    slope_r = b * fraction * (1 - fraction) * span  # dR/dT at the crossing [mOhm/K]
    var_level = noise_sigma**2 * ((1 - fraction) ** 2 + fraction**2) / k
    var_t = var_fit + var_level / slope_r**2
    return float(t_x), float(math.sqrt(var_t))
