"""Field-ladder measurement campaigns: sweep R(T) at each field, extract points."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fit import CriticalPoint
from .model import FilmParams, SignalModel, cavity_field, log_derivative
from .synth import ApparatusParams, TransitionRecord, extract_transition, transition_curve, transition_temperature


@dataclass(frozen=True)
class CampaignGrid:
    """Layout of a campaign.

    Fields are spaced uniformly between the nominal critical fields at
    ``t_max`` and ``t_min`` (uniform in sqrt(1 - t) to leading order). Each
    sweep covers the nominal transition temperature +- ``half_span_mk`` in
    steps of ``step_mk``.
    """

    t_min: float = 0.95
    t_max: float = 0.99
    n_fields: int = 20
    half_span_mk: float = 40.0
    step_mk: float = 0.5

    def __post_init__(self):
        if not 0 < self.t_min < self.t_max < 1:
            raise ValueError("need 0 < t_min < t_max < 1")
        if self.n_fields < 1 or self.half_span_mk <= 0 or self.step_mk <= 0:
            raise ValueError("n_fields, half_span_mk and step_mk must be positive")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, data: dict) -> "CampaignGrid":
        kw = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        if "n_fields" in kw:
            kw["n_fields"] = int(kw["n_fields"])
        return cls(**kw)


@dataclass
class Campaign:
    fields: np.ndarray
    curves: list[list[TransitionRecord]]
    points: list[CriticalPoint]
    temperatures: np.ndarray  # extracted T [K]
    sigma_t: np.ndarray  # extraction error [K]
    t_ref: float


def field_ladder(p: FilmParams, s: SignalModel, grid: CampaignGrid) -> np.ndarray:
    h_hi = float(cavity_field(p, grid.t_min, s, validate=False))
    h_lo = float(cavity_field(p, grid.t_max, s, validate=False))
    if grid.n_fields == 1:
        return np.array([0.5 * (h_lo + h_hi)])
    return np.linspace(h_lo, h_hi, grid.n_fields)


def sweep_grid(t_mid: float, grid: CampaignGrid) -> np.ndarray:
    n = int(round(grid.half_span_mk / grid.step_mk))
    return t_mid + np.arange(-n, n + 1) * grid.step_mk * 1e-3


def point_sigma(p: FilmParams, t: float, h: float, sigma_t_k: float, rel_field_err: float) -> float:
    """Field-equivalent error of one critical point [G]: temperature error through dH/dT, plus coil error."""
    dh_dT = h * abs(float(log_derivative(p, min(t, 1 - 1e-9)))) / p.t_c
    return math.hypot(dh_dT * sigma_t_k, rel_field_err * h)


def simulate_campaign(
    p: FilmParams,
    s: SignalModel,
    a: ApparatusParams,
    grid: CampaignGrid,
    seed: int,
    *,
    nominal: FilmParams | None = None,
) -> Campaign:
    """Run a synthetic campaign.

    ``p`` generates the data; ``nominal`` (default ``p``) plays the
    experimenter's prior: it places the sweep windows, reduces temperatures
    (``t_ref = nominal.t_c``) and converts temperature errors to field errors.
    Each curve draws from its own stream ``(seed, index)``.
    """
    nominal = nominal or p
    fields = field_ladder(nominal, SignalModel.single_film(), grid)
    curves, points, temps, sig_t = [], [], [], []
    for i, h in enumerate(fields):
        t_mid = transition_temperature(nominal, SignalModel.single_film(), float(h))
        recs = transition_curve(p, s, a, float(h), sweep_grid(t_mid, grid), seed=[int(seed), i])
        T, dT = extract_transition(recs, a.noise_sigma)
        t = T / nominal.t_c
        curves.append(recs)
        temps.append(T)
        sig_t.append(dT)
        points.append(CriticalPoint(t=t, h=float(h), sigma_h=point_sigma(nominal, t, float(h), dT, a.current_rel_err)))
    return Campaign(
        fields=np.asarray(fields),
        curves=curves,
        points=points,
        temperatures=np.asarray(temps),
        sigma_t=np.asarray(sig_t),
        t_ref=nominal.t_c,
    )
