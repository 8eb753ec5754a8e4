"""Regenerate the frozen sphere-center error samples used by the tests.

Independent of the package: directions come from normalized Gaussian draws
(the package samples z uniformly), and fits use scipy's trust-region
least_squares on geometric residuals.

    python tests/oracles/sphere_center_oracle.py
"""

from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

RADIUS = 5.0
NOISE_SD = 0.8
N_POINTS = 200
REPLICATIONS = 10_000
CAP_DEG = 90.0
SEED = 54321

OUT = Path(__file__).resolve().parents[1] / "data" / "sphere_cap_center_errors.npy"


def cap_directions(rng, n, cap_deg):
    zmin = np.cos(np.radians(cap_deg))
    out = np.empty((0, 3))
    while len(out) < n:
        d = rng.standard_normal((2 * n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        out = np.vstack([out, d[d[:, 2] >= zmin]])
    return out[:n]


def fit(points):
    c0 = points.mean(axis=0)
    r0 = np.linalg.norm(points - c0, axis=1).mean()
    res = least_squares(
        lambda x: np.linalg.norm(points - x[:3], axis=1) - x[3],
        np.append(c0, r0), xtol=1e-12, ftol=1e-12,
    )
    return res.x


def main():
    rng = np.random.default_rng(SEED)
    errs = np.empty(REPLICATIONS)
    for i in range(REPLICATIONS):
        pts = RADIUS * cap_directions(rng, N_POINTS, CAP_DEG) + rng.normal(0, NOISE_SD, (N_POINTS, 3))
        errs[i] = np.linalg.norm(fit(pts)[:3])
    np.save(OUT, errs)
    print(f"wrote {OUT}: median {np.median(errs):.4f}, p99 {np.percentile(errs, 99):.4f}")


if __name__ == "__main__":
    main()
