"""Closed-form critical-field models for thin superconducting films.

Units throughout: kelvin, gauss, nanometres, radians. Reduced temperature
``t = T / T_c`` is dimensionless.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

ArrayLike = Union[float, Sequence[float], np.ndarray]

SQRT24 = math.sqrt(24.0)
NUCLEATION_PREFACTOR = 9.0 / math.pi**6
# Flag level for the nucleation-correction smallness condition; the condition
# itself carries no numeric bound.
NUCLEATION_FLAG_LEVEL = 0.1
MAX_TILT = 0.1


class DomainError(ValueError):
    """Reduced temperature (or another argument) outside its allowed range."""


class ValidityError(ValueError):
    """The thin-film near-T_c approximation does not hold at the requested point."""


@dataclass(frozen=True)
class FilmParams:
    """Physical parameters of one superconducting film.

    Attributes:
        t_c: Critical temperature [K].
        h_t0: Thermodynamic critical field at zero temperature [G].
        lambda0: Effective penetration depth at zero temperature [nm].
        xi0: Coherence length at zero temperature [nm].
        thickness: Film thickness D [nm].
    """

    t_c: float
    h_t0: float
    lambda0: float
    xi0: float
    thickness: float

    def __post_init__(self):
        for name in ("t_c", "h_t0", "lambda0", "xi0", "thickness"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"FilmParams.{name} must be finite and > 0, got {value!r}")

    @property
    def is_thin(self) -> bool:
        """True when D < sqrt(5)*lambda0, i.e. thin at every temperature."""
        return self.thickness < math.sqrt(5.0) * self.lambda0

    @property
    def amplitude(self) -> float:
        """Composite amplitude sqrt(24) * H_T(0) * lambda0 / D [G]."""
        return SQRT24 * self.h_t0 * self.lambda0 / self.thickness

    @property
    def correction(self) -> float:
        """Nucleation-correction coefficient (9/pi^6) * D^2 / xi0^2."""
        return NUCLEATION_PREFACTOR * self.thickness**2 / self.xi0**2

    def replace(self, **changes) -> "FilmParams":
        values = asdict(self)
        values.update(changes)
        return FilmParams(**values)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "FilmParams":
        return cls(**{k: float(data[k]) for k in ("t_c", "h_t0", "lambda0", "xi0", "thickness")})


def _as_reduced(t: ArrayLike, *, upper_open: bool = False) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("reduced temperature must be finite")
    if np.any(arr < 0.0) or np.any(arr > 1.0) or (upper_open and np.any(arr >= 1.0)):
        bound = "[0, 1)" if upper_open else "[0, 1]"
        bad = arr[(arr < 0.0) | (arr > 1.0) | ((arr >= 1.0) if upper_open else False)]
        raise DomainError(f"reduced temperature must lie in {bound}, got {bad.flat[0]!r}")
    return arr


def _scalar_or_array(arr: np.ndarray, like: ArrayLike):
    return float(arr) if np.ndim(like) == 0 else arr


def penetration_depth(p: FilmParams, t: ArrayLike) -> ArrayLike:
    """Two-fluid penetration depth lambda0 / sqrt(1 - t^4) [nm], t in [0, 1)."""
    arr = _as_reduced(t, upper_open=True)
    return _scalar_or_array(p.lambda0 / np.sqrt(1.0 - arr**4), t)


# ---------------------------------------------------------------------------
# validity


@dataclass(frozen=True)
class Condition:
    name: str
    value: float
    limit: float
    margin: float
    passed: bool
    hard: bool


@dataclass(frozen=True)
class ValidityReport:
    """Per-condition outcome of the near-T_c thin-film approximation.

    Only ``hard`` conditions gate the model; the nucleation smallness check is
    advisory because it has no established threshold.
    """

    t: float
    conditions: tuple[Condition, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.conditions if c.hard)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def failures(self, *, include_advisory: bool = False) -> list[Condition]:
        return [c for c in self.conditions if not c.passed and (c.hard or include_advisory)]

    def describe(self) -> str:
        parts = []
        for c in self.conditions:
            status = "pass" if c.passed else "FAIL"
            kind = "" if c.hard else " (advisory)"
            parts.append(f"{c.name}{kind}: {c.value:.6g} vs {c.limit:.6g} -> {status}")
        return "; ".join(parts)

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "ok": self.ok,
            "conditions": [asdict(c) for c in self.conditions],
        }


def validity_check(p: FilmParams, t: float) -> ValidityReport:
    """Report the thin-film conditions at reduced temperature ``t``.

    Checks D < sqrt(5) * lambda_e(t) (hard) with the two-fluid lambda_e(t), and
    (9/pi^6) D^2 / xi0^2 < 0.1 (advisory flag).

    >>> p = FilmParams(1.0, 100.0, 100.0, 60.0, 10.0)
    >>> validity_check(p, 0.0).ok
    True
    """
    t = float(_as_reduced(t, upper_open=True))
    limit = math.sqrt(5.0) * penetration_depth(p, t)
    thin = Condition(
        name="thickness < sqrt(5)*lambda_e(t)",
        value=p.thickness,
        limit=limit,
        margin=limit - p.thickness,
        passed=p.thickness < limit,
        hard=True,
    )
    corr = p.correction
    nucl = Condition(
        name="nucleation correction small",
        value=corr,
        limit=NUCLEATION_FLAG_LEVEL,
        margin=NUCLEATION_FLAG_LEVEL - corr,
        passed=corr < NUCLEATION_FLAG_LEVEL,
        hard=False,
    )
    return ValidityReport(t=t, conditions=(thin, nucl))


def _enforce_validity(p: FilmParams, arr: np.ndarray) -> None:
    # the hard condition is monotone in t, so the smallest t below 1 decides
    inside = arr[arr < 1.0]
    if inside.size == 0:
        return
    report = validity_check(p, float(inside.min()))
    if not report.ok:
        names = ", ".join(c.name for c in report.failures())
        raise ValidityError(f"validity violated at t={report.t:.6g}: {names} ({report.describe()})")


# ---------------------------------------------------------------------------
# critical fields


def _eq_shape(t: np.ndarray) -> np.ndarray:
    # (1 - t)(1 + t) keeps full relative precision as t -> 1
    return np.sqrt((1.0 - t) * (1.0 + t) / (1.0 + t * t))


def field_from_components(amplitude: float, correction: float, t: ArrayLike) -> np.ndarray:
    """Evaluate A * sqrt((1-t^2)/(1+t^2)) * [1 + B (1-t)] without checks.

    Values of ``t`` at or above 1 give 0 (normal state).
    """
    t = np.asarray(t, dtype=float)
    tc = np.minimum(t, 1.0)
    return amplitude * _eq_shape(tc) * (1.0 + correction * (1.0 - tc))


def critical_field_parallel(p: FilmParams, t: ArrayLike, *, validate: bool = True) -> ArrayLike:
    """Parallel critical field H_par(t) [G] of a thin film near T_c.

    Parameters
    ----------
    p : FilmParams
    t : float or array
        Reduced temperature(s) in [0, 1].
    validate : bool
        When True (default) raise :class:`ValidityError` if the hard thin-film
        condition fails at any requested ``t``. Pass False to waive.
    """
    arr = _as_reduced(t)
    if validate:
        _enforce_validity(p, arr)
    return _scalar_or_array(field_from_components(p.amplitude, p.correction, arr), t)


def log_derivative(p: FilmParams, t: ArrayLike) -> ArrayLike:
    """Analytic d ln H_par / dt on t in (0, 1); negative, diverging at t -> 1."""
    arr = _as_reduced(t, upper_open=True)
    b = p.correction
    val = -2.0 * arr / ((1.0 - arr) * (1.0 + arr) * (1.0 + arr * arr)) - b / (1.0 + b * (1.0 - arr))
    return _scalar_or_array(val, t)


def single_film_law(h_amplitude: float, t: ArrayLike) -> ArrayLike:
    """Square-root law h_amplitude * sqrt(1 - t)."""
    arr = _as_reduced(t)
    return _scalar_or_array(h_amplitude * np.sqrt(1.0 - arr), t)


def perp_parallel_ratio(p: FilmParams, t: ArrayLike, *, lambda_model: str = "zero") -> ArrayLike:
    """Ratio H_par / H_perp ~ sqrt(24) (lambda / D) / sqrt(1 - t).

    ``lambda_model="zero"`` uses lambda0 (the explicit 1/sqrt(1-t) already
    carries the temperature dependence); ``"two_fluid"`` substitutes
    lambda0 / sqrt(1 - t^4).
    """
    arr = _as_reduced(t, upper_open=True)
    if lambda_model == "zero":
        lam = p.lambda0
    elif lambda_model == "two_fluid":
        lam = p.lambda0 / np.sqrt(1.0 - arr**4)
    else:
        raise ValueError(f"unknown lambda_model {lambda_model!r}")
    return _scalar_or_array(SQRT24 * (lam / p.thickness) / np.sqrt(1.0 - arr), t)


@dataclass(frozen=True)
class Alignment:
    """Field tilt ``theta`` out of the film plane and its uncertainty [rad]."""

    theta: float = 0.0
    delta_theta: float = 0.0

    def __post_init__(self):
        if abs(self.theta) > MAX_TILT:
            raise DomainError(f"|theta| = {abs(self.theta)} rad exceeds linearized limit {MAX_TILT}")
        if self.delta_theta < 0 or not math.isfinite(self.delta_theta):
            raise DomainError("delta_theta must be finite and >= 0")


def misalignment_shift(p: FilmParams, t: ArrayLike, a: Alignment, *, lambda_model: str = "zero") -> ArrayLike:
    """Relative critical-field error (H_par / H_perp) * delta_theta."""
    ratio = perp_parallel_ratio(p, t, lambda_model=lambda_model)
    return ratio * a.delta_theta


# ---------------------------------------------------------------------------
# in-cavity signal

SIGNAL_KINDS = ("single_film", "tabulated_ratio", "power_law")


@dataclass(frozen=True)
class SignalModel:
    """Deviation ratio r(t) = (H^F - H^C) / H^C of an in-cavity film.

    Use the constructors :meth:`single_film`, :meth:`power_law`,
    :meth:`tabulated` or :meth:`from_file`. Tabulated ratios are linearly
    interpolated and held constant beyond the table ends.
    """

    kind: str = "single_film"
    table: tuple[tuple[float, float], ...] = ()
    amplitude: float = 0.0
    exponent: float = 0.0

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ValueError(f"unknown signal kind {self.kind!r}; expected one of {SIGNAL_KINDS}")
        if self.kind == "tabulated_ratio":
            if len(self.table) < 2:
                raise ValueError("tabulated_ratio needs at least two (t, r) rows")
            ts = np.array([row[0] for row in self.table], dtype=float)
            rs = np.array([row[1] for row in self.table], dtype=float)
            if np.any(np.diff(ts) <= 0):
                raise ValueError("tabulated t values must be strictly increasing")
            if np.any(ts < 0) or np.any(ts >= 1):
                raise ValueError("tabulated t values must lie in [0, 1)")
            if not np.all(np.isfinite(rs)):
                raise ValueError("tabulated r values must be finite")
            if np.any(rs < 0):
                warnings.warn("signal table has r < 0 (cavity raising the critical field)", stacklevel=3)
        elif self.kind == "power_law":
            if not (math.isfinite(self.amplitude) and math.isfinite(self.exponent)):
                raise ValueError("power_law amplitude and exponent must be finite")
            if self.amplitude < 0:
                warnings.warn("power_law amplitude < 0 (cavity raising the critical field)", stacklevel=3)

    @classmethod
    def single_film(cls) -> "SignalModel":
        return cls(kind="single_film")

    @classmethod
    def power_law(cls, amplitude: float, exponent: float = 0.0) -> "SignalModel":
        return cls(kind="power_law", amplitude=float(amplitude), exponent=float(exponent))

    @classmethod
    def tabulated(cls, t: Sequence[float], r: Sequence[float]) -> "SignalModel":
        rows = tuple((float(a), float(b)) for a, b in zip(t, r))
        return cls(kind="tabulated_ratio", table=rows)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SignalModel":
        """Load a two-column (t, r) table; '#' comments, comma or whitespace separated."""
        ts, rs = [], []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.replace(",", " ").split()
            if len(fields) != 2:
                raise ValueError(f"{path}:{lineno}: expected two columns, got {len(fields)}")
            try:
                ts.append(float(fields[0]))
                rs.append(float(fields[1]))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric entry {line!r}") from None
        return cls.tabulated(ts, rs)

    def ratio(self, t: ArrayLike) -> ArrayLike:
        arr = np.asarray(t, dtype=float)
        if self.kind == "single_film":
            out = np.zeros_like(arr)
        elif self.kind == "power_law":
            with np.errstate(divide="ignore"):
                out = self.amplitude * np.power(np.maximum(1.0 - arr, 0.0), self.exponent)
        else:
            ts = np.array([row[0] for row in self.table])
            rs = np.array([row[1] for row in self.table])
            out = np.interp(arr, ts, rs)
        return _scalar_or_array(out, t)

    def to_dict(self) -> dict:
        if self.kind == "single_film":
            return {"kind": "single_film"}
        if self.kind == "power_law":
            return {"kind": "power_law", "amplitude": self.amplitude, "exponent": self.exponent}
        return {"kind": "tabulated_ratio", "table": [list(row) for row in self.table]}

    @classmethod
    def from_dict(cls, data: dict, base_dir: Union[str, Path, None] = None) -> "SignalModel":
        kind = data.get("kind", "single_film")
        if kind == "single_film":
            return cls.single_film()
        if kind == "power_law":
            return cls.power_law(data["amplitude"], data.get("exponent", 0.0))
        if kind == "tabulated_ratio":
            if "file" in data:
                path = Path(data["file"])
                if base_dir is not None and not path.is_absolute():
                    path = Path(base_dir) / path
                return cls.from_file(path)
            rows = data["table"]
            return cls.tabulated([r[0] for r in rows], [r[1] for r in rows])
        raise ValueError(f"unknown signal kind {kind!r}")


def cavity_field(p: FilmParams, t: ArrayLike, s: SignalModel, *, validate: bool = True) -> ArrayLike:
    """Critical field of the same film inside a cavity, H^F / (1 + r(t))."""
    h_film = critical_field_parallel(p, t, validate=validate)
    if s.kind == "single_film":
        return h_film
    r = np.asarray(s.ratio(t), dtype=float)
    if np.any(r <= -1.0):
        raise DomainError("deviation ratio r(t) <= -1 makes the cavity field undefined")
    return _scalar_or_array(np.asarray(h_film) / (1.0 + r), t)
