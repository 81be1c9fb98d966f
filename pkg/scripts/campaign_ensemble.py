#!/usr/bin/env python3
"""Repeat the 300 nm aluminium campaign over many seeds and summarise the fits.

Writes one row per seed (fitted T_c, lambda0, xi0 with errors, residual
sensitivity, and the temperature requirement at the median point) and
prints the pull statistics.

    python scripts/campaign_ensemble.py --seeds 100 --out out/ensemble.csv
"""
import argparse
import sys
from pathlib import Path

import numpy as np

from filmcrit.budget import temp_requirement
from filmcrit.campaign import CampaignGrid, simulate_campaign
from filmcrit.fit import fit_critical_field, residual_sensitivity
from filmcrit.io import write_csv
from filmcrit.model import FilmParams, SignalModel
from filmcrit.synth import ApparatusParams

TRUTH = FilmParams(t_c=1.2932, h_t0=105.0, lambda0=104.3, xi0=60.0, thickness=300.0)


def run(n_seeds: int, noise: float, n_fields: int):
    app = ApparatusParams(noise_sigma=noise)
    grid = CampaignGrid(n_fields=n_fields)
    init = TRUTH.replace(t_c=TRUTH.t_c * 1.00005, lambda0=TRUTH.lambda0 * 1.1, xi0=TRUTH.xi0 * 0.9)
    rows = []
    for seed in range(n_seeds):
        c = simulate_campaign(TRUTH, SignalModel.single_film(), app, grid, seed)
        fr = fit_critical_field(c.points, init, t_ref=c.t_ref)
        rs = residual_sensitivity(fr)
        t_med = float(np.median([p.t for p in c.points]))
        dt, dT = temp_requirement(fr.params, t_med, rs)
        rows.append(
            (
                seed,
                fr.params.t_c,
                fr.sigma["t_c"],
                fr.params.lambda0,
                fr.sigma["lambda0"],
                fr.params.xi0,
                fr.sigma.get("xi0", float("nan")),
                fr.reduced_chi2,
                rs,
                dt,
                dT,
                fr.converged,
            )
        )
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--noise", type=float, default=1.0, help="read-out noise [mOhm]")
    ap.add_argument("--fields", type=int, default=20, help="points per campaign")
    ap.add_argument("--out", type=Path, default=Path("out/ensemble.csv"))
    args = ap.parse_args(argv)

    rows = run(args.seeds, args.noise, args.fields)
    header = ("seed", "t_c_K", "sigma_t_c_K", "lambda0_nm", "sigma_lambda0_nm", "xi0_nm", "sigma_xi0_nm",
              "reduced_chi2", "residual_sensitivity", "delta_t", "delta_T_K", "converged")
    write_csv(args.out, header, rows, {"tool": "filmcrit", "script": "campaign_ensemble", "noise_mOhm": args.noise})

    arr = np.array([r[1:11] for r in rows], dtype=float)
    pulls = (arr[:, 0] - TRUTH.t_c) / arr[:, 1]
    print(f"campaigns           {len(rows)} ({sum(r[-1] for r in rows)} converged)")
    print(f"T_c pull            mean {pulls.mean():+.3f}  std {pulls.std(ddof=1):.3f}")
    print(f"sigma T_c           {arr[:, 1].mean():.2e} K (scatter {arr[:, 0].std(ddof=1):.2e} K)")
    print(f"sigma lambda0       {arr[:, 3].mean():.2f} nm")
    print(f"residual sens.      median {np.median(arr[:, 7]):.2e}")
    print(f"delta t / delta T   {np.median(arr[:, 8]):.2e} / {np.median(arr[:, 9]) * 1e3:.3f} mK")
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
