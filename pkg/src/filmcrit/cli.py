"""Command-line front end.

    filmcrit model    --config run.json
    filmcrit campaign --config run.json --seed 1
    filmcrit fit      --config run.json out/points.csv
    filmcrit budget   --config run.json
    filmcrit detect   --config run.json [out/fit.json | out/points.csv]
    filmcrit bridge   --config run.json [bridge.json] --seed 1

Exit codes: 0 success, 1 usage/config error, 2 numerical flag
(non-convergence or validity waiver used), 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .bridge import BridgeSpec, imperfect_bridge, peak_trace
from .budget import DEFAULT_WINDOW, budget_curve, detectability, single_film_temp_requirement
from .campaign import simulate_campaign
from .config import ConfigError, RunConfig, grid_from, load_config, output_dir
from .fit import FitError, fit_critical_field, residual_sensitivity
from .io import provenance, read_points, write_csv, write_json, write_points, write_records
from .model import (
    DomainError,
    FilmParams,
    ValidityError,
    cavity_field,
    critical_field_parallel,
    validity_check,
)
from .synth import ExtractionError, transition_temperature

log = logging.getLogger("filmcrit")

EXIT_OK, EXIT_USAGE, EXIT_FLAG, EXIT_IO = 0, 1, 2, 3

# Reference fit of the 300 nm aluminium test film, carried for side-by-side output.
# The xi0 uncertainty is printed with unit "nm K" in the reference; read here as nm.
REFERENCE_FIT = {
    "t_c": 1.2932,
    "sigma_t_c": 0.0002,
    "lambda0": 104.3,
    "sigma_lambda0": 0.3,
    "xi0": 60.0,
    "sigma_xi0": 20.0,
    "note": "sigma_xi0 printed as '20 nm K' in the reference; unit taken as nm",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _meta(cfg: RunConfig, seed, **extra) -> dict:
    return provenance(cfg.raw, seed, **extra)


# ---------------------------------------------------------------------------


def cmd_model(cfg: RunConfig, args) -> int:
    """Tabulate H(t) for the film and cavity over the model grid."""
    film = cfg.require_film()
    ts = cfg.model_t_grid()
    if np.any(ts < 0) or np.any(ts > 1):
        raise ConfigError("model_grid must lie in [0, 1]")
    waive = cfg.thresholds.waive_validity
    reports = [validity_check(film, float(t)) for t in ts if t < 1]
    violated = [r for r in reports if not r.ok]
    if violated and not waive:
        raise ValidityError(
            f"validity fails at {len(violated)} grid point(s), first t={violated[0].t:.6g}: "
            f"{violated[0].describe()} (set thresholds.waive_validity to tabulate anyway)"
        )
    h_film = critical_field_parallel(film, ts, validate=False)
    h_cav = cavity_field(film, ts, cfg.signal, validate=False)
    r = cfg.signal.ratio(ts)
    meta = _meta(cfg, cfg.seed)
    out = args.out_dir
    rows = [(float(t), math.sqrt(1 - t), float(hf), float(hc), float(rr)) for t, hf, hc, rr in zip(ts, h_film, h_cav, r)]
    write_csv(out / "model.csv", ("t", "sqrt_1mt", "h_film_G", "h_cavity_G", "r"), rows, meta)
    write_json(
        out / "validity.json",
        {"provenance": meta, "waived": waive, "all_ok": not violated, "reports": [x.to_dict() for x in reports]},
    )
    log.info("wrote %s", out / "model.csv")
    return EXIT_FLAG if violated else EXIT_OK


def cmd_campaign(cfg: RunConfig, args) -> int:
    """Simulate a field-ladder campaign and extract critical points."""
    film = cfg.require_film()
    seed = cfg.require_seed(args.seed)
    nominal = cfg.nominal_film or film
    grid = cfg.campaign_grid()
    camp = simulate_campaign(film, cfg.signal, cfg.apparatus, grid, seed, nominal=nominal)
    out = args.out_dir
    meta = _meta(cfg, seed)
    write_points(out / "points.csv", camp.points, camp.t_ref, meta)
    for i, recs in enumerate(camp.curves):
        write_records(out / "curves" / f"curve_{i:03d}.csv", recs, dict(meta, field_G=repr(float(camp.fields[i]))))
    summary = {
        "provenance": meta,
        "t_ref_K": camp.t_ref,
        "grid": grid.to_dict(),
        "apparatus": cfg.apparatus.to_dict(),
        "curves": [
            {"index": i, "field_G": float(h), "T_K": float(T), "sigma_T_K": float(s), "width_10_90_mK": cfg.apparatus.width}
            for i, (h, T, s) in enumerate(zip(camp.fields, camp.temperatures, camp.sigma_t))
        ],
    }
    write_json(out / "campaign.json", summary)
    log.info("wrote %d curves and %s", len(camp.curves), out / "points.csv")
    return EXIT_OK


def _fit_settings(cfg: RunConfig) -> tuple[FilmParams, list[str], str, float]:
    sec = cfg.section("fit")
    if "init" in sec:
        init = FilmParams.from_dict(sec["init"])
    else:
        init = cfg.nominal_film or cfg.require_film()
    return init, list(sec.get("fixed", [])), sec.get("sigma_mode", "absolute"), float(sec.get("band_level", 0.95))


def cmd_fit(cfg: RunConfig, args) -> int:
    """Fit critical-field points; write parameters, residuals and band."""
    if not args.data:
        raise UsageError("fit needs a points CSV")
    points, t_ref = read_points(Path(args.data[0]))
    init, fixed, sigma_mode, level = _fit_settings(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fr = fit_critical_field(
            points, init, fixed, t_ref=t_ref, sigma_mode=sigma_mode, max_iter=int(cfg.section("fit").get("max_iter", 200))
        )
    out = args.out_dir
    meta = _meta(cfg, cfg.seed, points_file=str(args.data[0]))
    payload = fr.to_dict()
    payload["provenance"] = meta
    payload["residual_sensitivity"] = residual_sensitivity(fr)
    payload["reference_comparison"] = REFERENCE_FIT
    write_json(out / "fit.json", payload)

    order = np.argsort([p.t for p in points])
    ts = np.array([points[i].t for i in order])
    hs = np.array([points[i].h for i in order])
    hm = fr.model(ts)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lo, hi = fr.band(ts, level)
    res = dict(fr.residuals)
    write_csv(
        out / "residuals.csv",
        ("t", "h_G", "h_model_G", "residual_rel"),
        [(float(t), float(h), float(m), res[float(t)]) for t, h, m in zip(ts, hs, hm)],
        meta,
    )
    write_csv(
        out / "band.csv",
        ("sqrt_1mt", "h_G", "h_model_G", "band_low_G", "band_high_G"),
        [(math.sqrt(1 - t), float(h), float(m), float(a), float(b)) for t, h, m, a, b in zip(ts, hs, hm, lo, hi)],
        dict(meta, band_level=level),
    )
    if not fr.converged:
        log.warning("fit flagged: %s", fr.message)
        return EXIT_FLAG
    return EXIT_OK


def cmd_budget(cfg: RunConfig, args) -> int:
    """Temperature and alignment requirements over a t window."""
    film = cfg.require_film()
    sec = cfg.section("budget")
    delta_r = float(sec.get("delta_r", 3e-3))
    window = tuple(sec.get("t_window", DEFAULT_WINDOW))
    n = int(sec.get("n", 20))
    lam = sec.get("lambda_model", "zero")
    rows, worst = budget_curve(film, delta_r, window, n, lambda_model=lam)
    meta = _meta(cfg, cfg.seed)
    out = args.out_dir
    table = []
    for b in rows:
        r = float(cfg.signal.ratio(b.t_eval))
        table.append(
            (b.t_eval, b.delta_t, b.delta_T, b.delta_theta, r, r / delta_r, single_film_temp_requirement(b.t_eval, delta_r))
        )
    write_csv(
        out / "budget.csv",
        ("t", "delta_t", "delta_T", "delta_theta_max", "r", "snr_contribution", "delta_t_single_film"),
        table,
        meta,
    )
    write_json(
        out / "budget.json",
        {
            "provenance": meta,
            "delta_r": delta_r,
            "t_window": list(window),
            "lambda_model": lam,
            "curve": [b.to_dict() for b in rows],
            "worst_case": worst.to_dict(),
        },
    )
    return EXIT_OK


def cmd_detect(cfg: RunConfig, args) -> int:
    """Signal-to-noise verdict for the configured cavity signal."""
    sec = cfg.section("detect")
    source = args.data[0] if args.data else None
    if source is None:
        ts = grid_from(sec.get("t_grid"), default=(0.95, 0.99, 10))
        dr = float(sec.get("delta_r", 3e-3))
        basis = "config delta_r"
    elif source.endswith(".json"):
        fit = json.loads(Path(source).read_text())
        ts = np.array([r[0] for r in fit["residuals"]])
        dr = float(fit["residual_sensitivity"])
        basis = "fit residual sensitivity"
    else:
        points, t_ref = read_points(Path(source))
        ts = np.array([p.t for p in points])
        dr = np.array([p.sigma_h / p.h for p in points])
        basis = "per-point sigma_h / h"
    threshold = float(sec.get("threshold", cfg.thresholds.detection))
    snr, verdict = detectability(dr, ts, cfg.signal, threshold, t_max=cfg.thresholds.t_max)
    meta = _meta(cfg, cfg.seed, source=str(source))
    write_json(
        args.out_dir / "detect.json",
        {
            "provenance": meta,
            "basis": basis,
            "n_points": int(len(ts)),
            "signal": cfg.signal.to_dict(),
            "snr": snr,
            "threshold": threshold,
            "detectable": verdict,
        },
    )
    print(f"snr={snr:.4g} threshold={threshold:g} detectable={'yes' if verdict else 'no'}")
    return EXIT_OK


def _bridge_spec(cfg: RunConfig, args) -> BridgeSpec:
    sec = cfg.section("bridge")
    if args.data:
        data = json.loads(Path(args.data[0]).read_text())
        return BridgeSpec.from_dict(data, Path(args.data[0]).parent)
    if "spec" in sec:
        return BridgeSpec.from_dict(sec["spec"], cfg.base_dir)
    imp = sec.get("imperfect", {})
    return imperfect_bridge(
        cfg.require_film(),
        cfg.apparatus,
        cfg.signal,
        r_normal_spread=float(imp.get("r_normal_spread", 0.01)),
        tc_spread_mk=float(imp.get("tc_spread_mk", 0.5)),
        seed=int(imp.get("fabrication_seed", 0)),
        excitation=float(imp.get("excitation_uA", 10.0)),
    )


def cmd_bridge(cfg: RunConfig, args) -> int:
    """Peak trace of a four-arm bridge versus field."""
    seed = cfg.require_seed(args.seed)
    spec = _bridge_spec(cfg, args)
    sec = cfg.section("bridge")
    ref = spec.arms[0].film
    fsec = sec.get("fields", {"t_min": 0.5, "t_max": 0.95, "n": 10})
    if isinstance(fsec, list):
        fields = np.asarray(fsec, dtype=float)
    else:
        fields = critical_field_parallel(ref, grid_from(fsec, default=(0.5, 0.95, 10)), validate=False)
    tsec = sec.get("t_grid", {})
    lows = [transition_temperature(a.film, a.signal, float(fields.max())) for a in spec.arms]
    t_lo = float(tsec.get("T_min_K", min(lows) - 0.03))
    t_hi = float(tsec.get("T_max_K", max(a.film.t_c for a in spec.arms) + 0.03))
    step = float(tsec.get("step_mK", 0.5)) * 1e-3
    temps = np.arange(t_lo, t_hi + 0.5 * step, step)
    trace = peak_trace(spec, fields, temps, seed)
    meta = _meta(cfg, seed, excitation_uA=spec.excitation)
    write_csv(
        args.out_dir / "trace.csv",
        ("field_G", "peak_T_K", "peak_height_mOhm", "significant"),
        [(p.field, p.peak_T, p.peak_height, p.significant) for p in trace],
        meta,
    )
    return EXIT_OK


COMMANDS = {
    "model": cmd_model,
    "campaign": cmd_campaign,
    "fit": cmd_fit,
    "budget": cmd_budget,
    "detect": cmd_detect,
    "bridge": cmd_bridge,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="filmcrit", description="Thin-film critical-field analysis chain")
    parser.add_argument("--version", action="version", version=f"filmcrit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, help=(COMMANDS[name].__doc__ or "").strip() or None)
        p.add_argument("--config", required=True, help="run configuration JSON")
        p.add_argument("--out", default=None, help="output directory (default: $FILMCRIT_OUT or ./out)")
        p.add_argument("--seed", type=int, default=None, help="random seed (overrides config)")
        p.add_argument("-v", "--verbose", action="store_true")
        p.add_argument("data", nargs="*", help="input data file(s)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        try:
            cfg = load_config(args.config)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {exc.filename}") from exc
        args.out_dir = output_dir(args.out, cfg)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, UsageError, ValidityError, DomainError, ExtractionError) as exc:
        print(f"filmcrit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FitError as exc:
        print(f"filmcrit: numerical error: {exc}", file=sys.stderr)
        return EXIT_FLAG
    except OSError as exc:
        print(f"filmcrit: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"filmcrit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
