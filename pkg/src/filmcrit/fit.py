"""Weighted nonlinear least-squares fit of critical-field points.

The fitted parameters are the composite amplitude ``A = sqrt(24) H_T(0)
lambda0 / D``, the critical temperature ``t_c`` and the nucleation
coefficient ``B = (9/pi^6) D^2 / xi0^2``. H_T(0) and D only enter through
``A`` and ``B``, so lambda0 and xi0 are recovered by back-substitution.

Input points carry ``t = T / t_ref`` for a fixed reference temperature
``t_ref`` (normally the nominal T_c), so the model evaluated for point i is
``H(t_i * t_ref / t_c)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.stats import norm

from .model import NUCLEATION_PREFACTOR, SQRT24, FilmParams, field_from_components

PARAM_NAMES = ("amplitude", "t_c", "correction")
_ALIASES = {"lambda0": "amplitude", "h_t0": "amplitude", "xi0": "correction", "tc": "t_c"}


class FitError(RuntimeError):
    pass


class SingularFitError(FitError):
    """Normal matrix is singular: the free parameters are not identifiable."""


class CriticalPoint(NamedTuple):
    t: float
    h: float  # G
    sigma_h: float  # G


def model_field(theta: np.ndarray, t: np.ndarray, t_ref: float) -> np.ndarray:
    """H at the points for parameter vector (amplitude, t_c, correction)."""
    amplitude, t_c, correction = theta
    return field_from_components(amplitude, correction, np.asarray(t) * (t_ref / t_c))


# finite-difference step floors; the correction enters as 1 + B (1 - t), so its natural scale is 1
FD_SCALE = (0.0, 0.0, 1.0)


def fd_step(value: float, rel: float = 1e-6, scale: float = 0.0) -> float:
    return rel * max(abs(value), scale, 1e-12)


def fd_jacobian(fun, theta: np.ndarray, free: Sequence[int], rel: float = 1e-6, scale=None) -> np.ndarray:
    """Central-difference Jacobian of ``fun`` with respect to ``theta[free]``.

    Parameter j is stepped by ``rel * max(|theta_j|, scale_j)``.
    """
    theta = np.asarray(theta, dtype=float)
    scale = np.zeros(theta.size) if scale is None else np.asarray(scale, dtype=float)
    cols = []
    for j in free:
        h = fd_step(theta[j], rel, scale[j])
        up, dn = theta.copy(), theta.copy()
        up[j] += h
        dn[j] -= h
        cols.append((fun(up) - fun(dn)) / (2.0 * h))
    return np.column_stack(cols)


def model_jacobian(theta, t, t_ref: float, free: Sequence[int] = (0, 1, 2)) -> np.ndarray:
    """dH/dtheta at the points, shape (n_t, n_free); the derivative the fit uses."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return fd_jacobian(lambda th: model_field(th, t, t_ref), theta, free, scale=FD_SCALE)


@dataclass(frozen=True)
class FitResult:
    """Outcome of :func:`fit_critical_field`.

    ``covariance`` is over ``free`` (in that order). ``sigma`` holds standard
    errors for the free fit parameters and, when derivable, for ``lambda0``
    and ``xi0``. Residuals are relative, ``(h_obs - h_model) / h_model``,
    ordered by t.
    """

    params: FilmParams
    theta: tuple[float, float, float]
    free: tuple[str, ...]
    covariance: np.ndarray
    sigma: dict
    residuals: tuple[tuple[float, float], ...]
    chi2: float
    dof: int
    t_ref: float
    t_range: tuple[float, float]
    converged: bool
    n_iter: int
    scaled: bool = False
    message: str = ""

    @property
    def reduced_chi2(self) -> float:
        return self.chi2 / self.dof if self.dof > 0 else math.nan

    def model(self, t) -> np.ndarray:
        """Fitted H at input-convention reduced temperature(s) ``t``."""
        return model_field(np.array(self.theta), t, self.t_ref)

    def band(self, t, level: float = 0.95):
        return confidence_band(self, t, level)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "fit_parameters": dict(zip(PARAM_NAMES, self.theta)),
            "free": list(self.free),
            "sigma": dict(self.sigma),
            "covariance": [float(v) for v in np.asarray(self.covariance).ravel()],
            "covariance_shape": list(np.asarray(self.covariance).shape),
            "chi2": self.chi2,
            "dof": self.dof,
            "reduced_chi2": self.reduced_chi2,
            "covariance_scaled_by_reduced_chi2": self.scaled,
            "t_ref": self.t_ref,
            "t_range": list(self.t_range),
            "converged": self.converged,
            "n_iter": self.n_iter,
            "message": self.message,
            "residuals": [list(r) for r in self.residuals],
        }


def _normalize_fixed(fixed: Iterable[str]) -> set[str]:
    out = set()
    for name in fixed:
        canon = _ALIASES.get(name, name)
        if canon not in PARAM_NAMES:
            raise ValueError(f"unknown fit parameter {name!r}; choose from {PARAM_NAMES}")
        out.add(canon)
    return out


def _levenberg_marquardt(residual_fn, theta0, free, *, t_c_floor=0.0, max_iter=200, xtol=1e-10, ftol=1e-10):
    theta = np.array(theta0, dtype=float)
    r = residual_fn(theta)
    cost = float(r @ r)
    damping = 1e-3
    converged = False
    message = "maximum iterations reached"
    it = 0
    for it in range(1, max_iter + 1):
        J = fd_jacobian(residual_fn, theta, free, scale=FD_SCALE)
        g = J.T @ r
        N = J.T @ J
        diag = np.diag(N).copy()
        if np.any(diag <= 0):
            raise SingularFitError("a free parameter has no influence on the residuals")
        accepted = False
        while damping < 1e16:
            try:
                step = np.linalg.solve(N + damping * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                damping *= 3.0
                continue
            trial = theta.copy()
            trial[free] += step
            if trial[1] <= t_c_floor or trial[0] <= 0:
                damping *= 3.0
                continue
            r_trial = residual_fn(trial)
            cost_trial = float(r_trial @ r_trial)
            if np.isfinite(cost_trial) and cost_trial < cost:
                accepted = True
                break
            damping *= 3.0
        if not accepted:
            # no downhill step representable: at a floating-point minimum
            converged = True
            message = "no further decrease possible"
            break
        rel_step = float(np.max(np.abs(step) / np.maximum(np.abs(theta[free]), 1e-12)))
        rel_cost = (cost - cost_trial) / cost if cost > 0 else 0.0
        theta, r, cost = trial, r_trial, cost_trial
        damping = max(damping * 0.3, 1e-12)
        if (rel_step < xtol and rel_cost < ftol) or cost == 0.0:
            converged = True
            message = "relative step and cost change below tolerance"
            break
    return theta, r, cost, converged, it, message


def fit_critical_field(
    points: Sequence[CriticalPoint],
    init: FilmParams,
    fixed: Iterable[str] = (),
    *,
    t_ref: float | None = None,
    sigma_mode: str = "absolute",
    max_iter: int = 200,
) -> FitResult:
    """Fit H(t; amplitude, t_c, correction) to critical-field points.

    Parameters
    ----------
    points
        Measured (t, h, sigma_h). ``sigma_h`` may be NaN/None/<=0 for
        unweighted data; the covariance is then scaled by the reduced chi2.
    init
        Starting parameters. ``h_t0`` and ``thickness`` are taken as known
        for the back-substitution of lambda0 and xi0.
    fixed
        Parameter names held at ``init``: any of ``amplitude``, ``t_c``,
        ``correction`` (``lambda0``/``xi0`` are accepted as aliases).
    t_ref
        Temperature [K] the input ``t`` values are reduced by; defaults to
        ``init.t_c``.
    sigma_mode
        ``"absolute"``: sigmas are trusted, covariance unscaled.
        ``"relative"``: covariance multiplied by the reduced chi2.
    """
    if sigma_mode not in ("absolute", "relative"):
        raise ValueError("sigma_mode must be 'absolute' or 'relative'")
    fixed_set = _normalize_fixed(fixed)
    free_names = tuple(n for n in PARAM_NAMES if n not in fixed_set)
    free = [PARAM_NAMES.index(n) for n in free_names]
    if not free:
        raise ValueError("all parameters fixed; nothing to fit")
    # canonical order, so the floating-point sums (and the result) do not depend on input order
    pts = sorted(points, key=lambda pt: (pt.t, pt.h, -1.0 if pt.sigma_h is None else pt.sigma_h))
    if len(pts) < len(free) + 2:
        raise ValueError(f"need at least {len(free) + 2} points for {len(free)} free parameters")

    t = np.array([pt.t for pt in pts], dtype=float)
    h = np.array([pt.h for pt in pts], dtype=float)
    raw_sigma = np.array([np.nan if pt.sigma_h is None else pt.sigma_h for pt in pts], dtype=float)
    weighted = bool(np.all(np.isfinite(raw_sigma) & (raw_sigma > 0)))
    sigma = raw_sigma if weighted else np.ones_like(h)
    scaled = sigma_mode == "relative" or not weighted
    if np.any((t <= 0) | (t >= 1)) or np.any(h <= 0):
        raise ValueError("points need 0 < t < 1 and h > 0")
    t_ref = float(init.t_c if t_ref is None else t_ref)

    def residual_fn(theta):
        return (h - model_field(theta, t, t_ref)) / sigma

    theta0 = np.array([init.amplitude, init.t_c, init.correction])
    # a start at or below the hottest point has zero model field there and no gradient in t_c
    t_floor = float(t.max()) * t_ref
    if theta0[1] <= t_floor:
        if "t_c" in fixed_set:
            raise ValueError(f"fixed t_c = {theta0[1]} K is not above the hottest point ({t_floor} K)")
        theta0[1] = t_floor * (1.0 + 0.5 * (1.0 - float(t.max())))
    theta, r, cost, converged, n_iter, message = _levenberg_marquardt(
        residual_fn, theta0, free, t_c_floor=t_floor, max_iter=max_iter
    )
    if not converged:
        warnings.warn(f"fit did not converge after {n_iter} iterations", RuntimeWarning, stacklevel=2)

    J = fd_jacobian(residual_fn, theta, free, scale=FD_SCALE)
    N = J.T @ J
    # scale columns before inverting; amplitude and t_c differ by orders of magnitude
    d = np.sqrt(np.diag(N))
    if np.any(d == 0):
        raise SingularFitError("normal matrix is singular")
    Ns = N / np.outer(d, d)
    if np.linalg.cond(Ns) > 1e14:
        raise SingularFitError("normal matrix is singular: free parameters are degenerate")
    cov = np.linalg.inv(Ns) / np.outer(d, d)
    cov = 0.5 * (cov + cov.T)
    dof = len(pts) - len(free)
    chi2 = float(cost)
    if scaled:
        cov = cov * (chi2 / dof)

    amplitude, t_c, correction = (float(v) for v in theta)
    lambda0 = amplitude * init.thickness / (SQRT24 * init.h_t0)
    xi0 = init.thickness * math.sqrt(NUCLEATION_PREFACTOR / correction) if correction > 0 else math.inf
    sig = {name: float(math.sqrt(max(cov[i, i], 0.0))) for i, name in enumerate(free_names)}
    if "amplitude" in sig:
        sig["lambda0"] = lambda0 * sig["amplitude"] / amplitude
    if "correction" in sig and correction > 0:
        sig["xi0"] = 0.5 * xi0 * sig["correction"] / correction

    if math.isfinite(xi0):
        params = FilmParams(t_c=t_c, h_t0=init.h_t0, lambda0=lambda0, xi0=xi0, thickness=init.thickness)
    else:
        # correction fitted to <= 0: no finite coherence length; keep init xi0 in params
        params = FilmParams(t_c=t_c, h_t0=init.h_t0, lambda0=lambda0, xi0=init.xi0, thickness=init.thickness)
        message += "; correction <= 0, xi0 undefined"

    h_model = model_field(theta, t, t_ref)
    residuals = tuple((float(ti), float((hi - mi) / mi)) for ti, hi, mi in zip(t, h, h_model))
    return FitResult(
        params=params,
        theta=(amplitude, t_c, correction),
        free=free_names,
        covariance=cov,
        sigma=sig,
        residuals=residuals,
        chi2=chi2,
        dof=dof,
        t_ref=t_ref,
        t_range=(float(t.min()), float(t.max())),
        converged=converged,
        n_iter=n_iter,
        scaled=scaled,
        message=message,
    )


def model_gradient(fr: FitResult, t) -> np.ndarray:
    """Gradient of the fitted H(t) in the free parameters, shape (n_t, n_free)."""
    free = [PARAM_NAMES.index(n) for n in fr.free]
    return model_jacobian(np.array(fr.theta), t, fr.t_ref, free)


def confidence_band(fr: FitResult, t, level: float = 0.95):
    """Delta-method band ``H(t) -+ z(level) sqrt(g^T C g)`` [G].

    ``level`` is the two-sided coverage. Returns (low, high), scalars for
    scalar ``t``.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    scalar = np.ndim(t) == 0
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    lo_t, hi_t = fr.t_range
    if np.any(tt < lo_t) or np.any(tt > hi_t):
        warnings.warn("confidence band extrapolated outside the fitted t range", stacklevel=2)
    g = model_gradient(fr, tt)
    var = np.einsum("ij,jk,ik->i", g, fr.covariance, g)
    half = norm.ppf(0.5 + 0.5 * level) * np.sqrt(np.maximum(var, 0.0))
    mid = fr.model(tt)
    low, high = mid - half, mid + half
    if scalar:
        return float(low[0]), float(high[0])
    return low, high


def residual_sensitivity(fr: FitResult, t_window: tuple[float, float] | None = None) -> float:
    """RMS of the relative residuals with t inside ``t_window`` (inclusive)."""
    lo, hi = t_window if t_window is not None else fr.t_range
    vals = np.array([r for t, r in fr.residuals if lo <= t <= hi])
    if vals.size == 0:
        raise ValueError(f"no fitted points inside window [{lo}, {hi}]")
    return float(np.sqrt(np.mean(vals**2)))
