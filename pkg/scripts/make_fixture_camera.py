#!/usr/bin/env python3
"""Regenerate the wide-angle fixture calibration file.

Builds the camera from the constants in fishrope.fixtures, verifies the
properties the fixture is chosen for (strictly increasing radial
polynomial, image circle inside the frame, angular extent ratio within
the target window), then writes calibrations/synthetic_fisheye.yaml
including the frozen scene extrinsics.
"""

from __future__ import annotations

import pathlib
import sys

import numpy as np

from fishrope import fixtures
from fishrope.formats import save_calibration

OUT = pathlib.Path(__file__).resolve().parent.parent / "calibrations" / "synthetic_fisheye.yaml"


def main() -> int:
    camera = fixtures.wide_camera()
    lo, hi = fixtures.EXTENT_RATIO_WINDOW
    ratio = camera.angular_extent_ratio(0.05 * camera.r_max)
    print(f"coeffs: {camera.coeffs}")
    print(f"theta_max: {camera.theta_max} rad, r_max: {camera.r_max:.3f} px")
    print(f"angular extent ratio (5% r_max offset): {ratio:.4f}")
    if not lo <= ratio <= hi:
        print(f"ratio outside target window [{lo}, {hi}]", file=sys.stderr)
        return 1
    margin = min(
        camera.principal_point[0],
        camera.principal_point[1],
        camera.image_size[0] - camera.principal_point[0],
        camera.image_size[1] - camera.principal_point[1],
    )
    if camera.r_max > margin:
        print("image circle does not fit inside the frame", file=sys.stderr)
        return 1
    thetas = np.linspace(0.0, camera.theta_max, 8192)
    if np.any(camera.radial_derivative(thetas) <= 0.0):
        print("radial polynomial is not strictly increasing", file=sys.stderr)
        return 1

    OUT.parent.mkdir(parents=True, exist_ok=True)
    save_calibration(OUT, camera, fixtures.scene_extrinsics())
    print(f"wrote {OUT}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
