"""Four-arm film/cavity bridge and its transition peak versus applied field.

Arms 1 and 3 are conventionally the simple films, 2 and 4 the cavities. The
reported imbalance is the output voltage of a current-driven bridge divided
by the excitation current,

    (R1 R3 - R2 R4) / (R1 + R2 + R3 + R4)   [mOhm],

which vanishes for a balanced bridge and does not depend on the excitation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .model import FilmParams, SignalModel
from .synth import ApparatusParams, SeedLike, resistance_profile, transition_temperature

SIGNIFICANCE_FACTOR = 3.0


@dataclass(frozen=True)
class BridgeArm:
    film: FilmParams
    signal: SignalModel
    apparatus: ApparatusParams

    def to_dict(self) -> dict:
        return {"film": self.film.to_dict(), "signal": self.signal.to_dict(), "apparatus": self.apparatus.to_dict()}

    @classmethod
    def from_dict(cls, data: dict, base_dir=None) -> "BridgeArm":
        return cls(
            film=FilmParams.from_dict(data["film"]),
            signal=SignalModel.from_dict(data.get("signal", {"kind": "single_film"}), base_dir),
            apparatus=ApparatusParams.from_dict(data.get("apparatus", {})),
        )


@dataclass(frozen=True)
class BridgeSpec:
    arms: tuple[BridgeArm, BridgeArm, BridgeArm, BridgeArm]
    excitation: float = 10.0  # uA

    def __post_init__(self):
        if len(self.arms) != 4:
            raise ValueError("a bridge needs exactly four arms")
        if not self.excitation > 0:
            raise ValueError("excitation must be > 0")

    @property
    def noise_level(self) -> float:
        """Largest per-arm read-out noise [mOhm]."""
        return max(arm.apparatus.noise_sigma for arm in self.arms)

    def to_dict(self) -> dict:
        return {"excitation_uA": self.excitation, "arms": [arm.to_dict() for arm in self.arms]}

    @classmethod
    def from_dict(cls, data: dict, base_dir=None) -> "BridgeSpec":
        arms = tuple(BridgeArm.from_dict(a, base_dir) for a in data["arms"])
        return cls(arms=arms, excitation=float(data.get("excitation_uA", 10.0)))


def imperfect_bridge(
    film: FilmParams,
    apparatus: ApparatusParams,
    cavity_signal: SignalModel,
    *,
    r_normal_spread: float = 0.01,
    tc_spread_mk: float = 0.5,
    seed: SeedLike = 0,
    excitation: float = 10.0,
) -> BridgeSpec:
    """Nominally matched films (arms 1, 3) and cavities (arms 2, 4) with fabrication scatter.

    Each arm gets an independent Gaussian relative offset on ``r_normal``
    (scale ``r_normal_spread``) and an absolute T_c offset (scale
    ``tc_spread_mk``), drawn from ``seed``. This realization is fixed per
    sample; read-out noise is drawn separately at evaluation.
    """
    rng = np.random.default_rng(seed)
    dr = rng.normal(0.0, r_normal_spread, 4)
    dtc = rng.normal(0.0, tc_spread_mk * 1e-3, 4)
    signals = (SignalModel.single_film(), cavity_signal, SignalModel.single_film(), cavity_signal)
    arms = []
    for k in range(4):
        r_n = apparatus.r_normal * (1.0 + dr[k])
        arms.append(
            BridgeArm(
                film=film.replace(t_c=film.t_c + dtc[k]),
                signal=signals[k],
                apparatus=apparatus.replace(r_normal=max(r_n, apparatus.r_residual * 1.0001 + 1e-9)),
            )
        )
    return BridgeSpec(arms=tuple(arms), excitation=excitation)


def imbalance(r1, r2, r3, r4):
    return (r1 * r3 - r2 * r4) / (r1 + r2 + r3 + r4)


def arm_resistances(spec: BridgeSpec, temperatures, field: float) -> np.ndarray:
    """Noiseless arm resistances, shape (4, n) [mOhm]."""
    temps = np.atleast_1d(np.asarray(temperatures, dtype=float))
    out = np.empty((4, temps.size))
    for k, arm in enumerate(spec.arms):
        t_mid = transition_temperature(arm.film, arm.signal, field)
        out[k] = resistance_profile(t_mid, arm.apparatus, temps)
    return out


def imbalance_gradient(r1, r2, r3, r4) -> np.ndarray:
    """d imbalance / d R_k, shape (4, n)."""
    total = r1 + r2 + r3 + r4
    imb = (r1 * r3 - r2 * r4) / total
    return np.array([r3 - imb, -r4 - imb, r1 - imb, -r2 - imb]) / total


def bridge_sweep(spec: BridgeSpec, temperatures, field: float, seed: SeedLike | None) -> np.ndarray:
    """Imbalance [mOhm] at each temperature for one applied field.

    Per-arm read-out noise enters through the first-order response of the
    imbalance about the noiseless arms; near zero resistance the exact ratio
    is dominated by the noise in its denominator, which a four-wire read-out
    does not see.
    """
    arms = arm_resistances(spec, temperatures, field)
    out = imbalance(*arms)
    if seed is not None:
        sigmas = np.array([arm.apparatus.noise_sigma for arm in spec.arms])[:, None]
        noise = np.random.default_rng(seed).normal(0.0, 1.0, arms.shape) * sigmas
        out = out + np.sum(imbalance_gradient(*arms) * noise, axis=0)
    return out


def bridge_output(spec: BridgeSpec, T: float, field: float, seed: SeedLike | None) -> float:
    """Imbalance [mOhm] at a single temperature and field."""
    return float(bridge_sweep(spec, [T], field, seed)[0])


class PeakPoint(NamedTuple):
    field: float  # G
    peak_T: float  # K
    peak_height: float  # mOhm, signed
    significant: bool


def peak_trace(
    spec: BridgeSpec,
    fields: Sequence[float],
    t_grid: Sequence[float],
    seed: int | None,
    *,
    factor: float = SIGNIFICANCE_FACTOR,
) -> list[PeakPoint]:
    """Largest |imbalance| over the temperature sweep at each field.

    Peaks with ``|height| <= factor * max arm noise`` are flagged
    insignificant. Field ``i`` draws its noise from ``(seed, i)``; ``seed``
    None gives noiseless sweeps.
    """
    fields = list(fields)
    if not fields:
        raise ValueError("fields must be nonempty")
    temps = np.asarray(t_grid, dtype=float)
    limit = factor * spec.noise_level
    trace = []
    for i, h in enumerate(fields):
        sub_seed = None if seed is None else [int(seed), i]
        out = bridge_sweep(spec, temps, float(h), sub_seed)
        j = int(np.argmax(np.abs(out)))
        height = float(out[j])
        trace.append(PeakPoint(float(h), float(temps[j]), height, abs(height) > limit))
    return trace
