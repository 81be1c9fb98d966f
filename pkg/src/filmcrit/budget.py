"""Temperature and alignment budgets, and the detectability test for a cavity signal."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence, Union

import numpy as np

from .model import DomainError, FilmParams, SignalModel, log_derivative, perp_parallel_ratio

DEFAULT_WINDOW = (0.9, 0.995)
DEFAULT_T_MAX = 0.995
DEFAULT_THRESHOLD = 5.0


@dataclass(frozen=True)
class Budget:
    """Sensitivity requirements at one reduced temperature.

    ``delta_T`` is in kelvin, ``delta_theta`` in radians.
    """

    delta_r: float
    delta_t: float
    delta_T: float
    delta_theta: float
    t_eval: float

    def __post_init__(self):
        for name in ("delta_r", "delta_t", "delta_T", "delta_theta", "t_eval"):
            if not getattr(self, name) > 0:
                raise ValueError(f"Budget.{name} must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)


def _check_open(t: float) -> float:
    t = float(t)
    if not 0 < t < 1:
        raise DomainError(
            f"t = {t!r} outside (0, 1); as t -> 1 the logarithmic slope diverges and the requirement tends to 0"
        )
    return t


def temp_requirement(p: FilmParams, t: float, delta_r: float) -> tuple[float, float]:
    """Reduced and absolute temperature resolution matching a field resolution.

    ``delta_t = delta_r / |d ln H / dt|`` and ``delta_T = delta_t * T_c`` [K].
    """
    t = _check_open(t)
    slope = abs(float(log_derivative(p, t)))
    delta_t = delta_r / slope
    return delta_t, delta_t * p.t_c


def single_film_temp_requirement(t: float, delta_r: float) -> float:
    """Closed form ``2 (1 - t) delta_r`` for the pure square-root law."""
    t = _check_open(t)
    return 2.0 * (1.0 - t) * delta_r


def alignment_requirement(p: FilmParams, t: float, delta_r: float, *, lambda_model: str = "zero") -> float:
    """Largest tilt uncertainty [rad] whose field error stays below ``delta_r``."""
    t = _check_open(t)
    return delta_r / float(perp_parallel_ratio(p, t, lambda_model=lambda_model))


def budget_at(p: FilmParams, t: float, delta_r: float, *, lambda_model: str = "zero") -> Budget:
    delta_t, delta_T = temp_requirement(p, t, delta_r)
    return Budget(
        delta_r=delta_r,
        delta_t=delta_t,
        delta_T=delta_T,
        delta_theta=alignment_requirement(p, t, delta_r, lambda_model=lambda_model),
        t_eval=t,
    )


def budget_curve(
    p: FilmParams,
    delta_r: float,
    t_window: tuple[float, float] = DEFAULT_WINDOW,
    n: int = 20,
    *,
    lambda_model: str = "zero",
) -> tuple[list[Budget], Budget]:
    """Budgets over ``t_window`` plus the worst case (smallest of each requirement).

    The worst-case entry takes the minimum delta_t, delta_T, delta_theta over
    the window; its ``t_eval`` is the point of the tightest temperature
    requirement.
    """
    lo, hi = t_window
    if not 0 < lo <= hi < 1:
        raise DomainError("budget window must satisfy 0 < lo <= hi < 1")
    ts = np.linspace(lo, hi, n) if n > 1 else np.array([lo])
    rows = [budget_at(p, float(t), delta_r, lambda_model=lambda_model) for t in ts]
    tightest = min(rows, key=lambda b: b.delta_t)
    worst = Budget(
        delta_r=delta_r,
        delta_t=tightest.delta_t,
        delta_T=min(b.delta_T for b in rows),
        delta_theta=min(b.delta_theta for b in rows),
        t_eval=tightest.t_eval,
    )
    return rows, worst


def detectability(
    points_sensitivity: Union[float, Sequence[float]],
    t_grid: Sequence[float],
    s: SignalModel,
    threshold: float = DEFAULT_THRESHOLD,
    *,
    t_max: float = DEFAULT_T_MAX,
) -> tuple[float, bool]:
    """Quadrature signal-to-noise of a cavity signal over a set of measured points.

    ``snr = sqrt(sum_i (r(t_i) / delta_r_i)^2)``; detectable when
    ``snr >= threshold``.
    """
    ts = np.asarray(t_grid, dtype=float)
    if ts.size == 0:
        raise ValueError("t_grid is empty")
    if np.any(ts <= 0) or np.any(ts > t_max):
        raise DomainError(f"t_grid must lie in (0, {t_max}]")
    dr = np.broadcast_to(np.asarray(points_sensitivity, dtype=float), ts.shape)
    if np.any(dr <= 0):
        raise ValueError("per-point sensitivities must be > 0")
    r = np.asarray(s.ratio(ts), dtype=float)
    snr = float(math.sqrt(np.sum((r / dr) ** 2)))
    return snr, snr >= threshold
