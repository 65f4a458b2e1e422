#!/usr/bin/env python3
"""Regenerate the committed binary-descriptor point-pair table.

Draws 256 point pairs from a seeded isotropic Gaussian (sigma = 31/5) and
keeps only points within the radius-15 disc, so the pattern stays inside the
31x31 patch under every rotation. The output is committed at
src/flowcam/data/brief_pairs.txt; rerunning this script reproduces it
byte for byte.
"""

from pathlib import Path

import numpy as np

N_PAIRS = 256
SIGMA = 31 / 5
RADIUS = 15
SEED = 20240214


def sample_point(rng: np.random.Generator) -> tuple[int, int]:
    while True:
        x, y = rng.normal(0.0, SIGMA, size=2)
        xi, yi = int(np.floor(x + 0.5)), int(np.floor(y + 0.5))
        if xi * xi + yi * yi <= RADIUS * RADIUS:
            return xi, yi


def main() -> None:
    rng = np.random.default_rng(SEED)
    lines = []
    for _ in range(N_PAIRS):
        px, py = sample_point(rng)
        qx, qy = sample_point(rng)
        while (qx, qy) == (px, py):
            qx, qy = sample_point(rng)
        lines.append(f"{px} {py} {qx} {qy}")
    out = Path(__file__).resolve().parent.parent / "src" / "flowcam" / "data" / "brief_pairs.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n", encoding="ascii")
    print(f"wrote {N_PAIRS} pairs to {out}")


if __name__ == "__main__":
    main()
