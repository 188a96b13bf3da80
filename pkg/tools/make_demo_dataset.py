"""Generate the bundled demo dataset (data/concrete.csv).

The public compressive-strength table cannot be redistributed from this
repository nor fetched at build time, so the demo file is a synthetic
stand-in with the same schema and similar statistical structure: realistic
constituent ranges, the same curing-age grid, and strength produced by a
binder/water power law with a curing-time maturity factor plus noise.
Replace it with the real CSV for real studies; the pipeline is identical.

Usage: python tools/make_demo_dataset.py [out_csv]
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

N_ROWS = 1030
SEED = 20240611

# Matches the well-known first row of the public table so quick visual
# checks line up.
FIRST_ROW = "540,0,0,162,2.5,1040,676,28,79.99"

AGES = np.array([1, 3, 7, 14, 28, 56, 90, 91, 100, 120, 180, 270, 360, 365])
AGE_WEIGHTS = np.array([2, 134, 126, 62, 425, 91, 54, 52, 52, 3, 26, 13, 1, 14], dtype=float)


def maturity(age_days: np.ndarray) -> np.ndarray:
    # CEB-style strength development curve, s = 0.25
    return np.exp(0.25 * (1.0 - np.sqrt(28.0 / age_days)))


# kg per m3 of each constituent, used for volumetric closure
DENSITIES = {"cement": 3150.0, "slag": 2900.0, "fly_ash": 2300.0,
             "water": 1000.0, "sp": 1100.0, "coarse": 2700.0, "fine": 2650.0}


def main(out_path: Path) -> None:
    rng = np.random.Generator(np.random.PCG64(SEED))
    n = N_ROWS - 1  # first row is fixed

    cement = rng.uniform(120.0, 500.0, n)
    slag = np.where(rng.random(n) < 0.6, 0.0, rng.uniform(20.0, 300.0, n))
    fly_ash = np.where(rng.random(n) < 0.6, 0.0, rng.uniform(20.0, 180.0, n))
    sp = np.where(rng.random(n) < 0.35, 0.0, rng.uniform(2.0, 30.0, n))
    # water demand follows the binder content for a workable mix; each kg of
    # superplasticizer displaces a few kg of water
    binder_mass = cement + slag + fly_ash
    water = np.clip(
        binder_mass * rng.uniform(0.34, 0.82, n) - 2.0 * sp + rng.normal(0.0, 4.0, n),
        125.0, 245.0,
    )
    # aggregates fill the remaining volume (2% entrained air), split by a
    # random coarse fraction; mixes therefore sum to ~1 m3 like real ones
    paste_vol = (cement / DENSITIES["cement"] + slag / DENSITIES["slag"]
                 + fly_ash / DENSITIES["fly_ash"] + water / DENSITIES["water"]
                 + sp / DENSITIES["sp"])
    agg_vol = np.clip(1.0 - 0.02 - paste_vol, 0.25, None)
    coarse_frac = rng.uniform(0.47, 0.60, n)
    coarse = np.clip(coarse_frac * agg_vol * DENSITIES["coarse"], 750.0, 1200.0)
    fine = np.clip((1.0 - coarse_frac) * agg_vol * DENSITIES["fine"], 550.0, 1000.0)
    age = rng.choice(AGES, size=n, p=AGE_WEIGHTS / AGE_WEIGHTS.sum())

    binder = cement + 0.85 * slag + 0.55 * fly_ash
    f28 = 24.0 * (binder / water - 0.5) + 0.25 * sp
    strength = f28 * maturity(age)
    strength *= rng.lognormal(mean=0.0, sigma=0.08, size=n)
    strength += rng.normal(0.0, 1.0, n)
    strength = np.clip(strength, 1.5, 95.0)

    lines = [
        "cement,blast_furnace_slag,fly_ash,water,superplasticizer,"
        "coarse_aggregate,fine_aggregate,age,strength",
        FIRST_ROW,
    ]
    for i in range(n):
        lines.append(
            f"{cement[i]:.1f},{slag[i]:.1f},{fly_ash[i]:.1f},{water[i]:.1f},"
            f"{sp[i]:.1f},{coarse[i]:.1f},{fine[i]:.1f},{age[i]:d},{strength[i]:.2f}"
        )
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {N_ROWS} rows to {out_path}")


if __name__ == "__main__":
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data/concrete.csv")
    main(out)
