"""Angular coordinate grids for image patches and BEV cells.

Every token that enters attention is bound to a (theta, phi) pair in the
lens spherical coordinate system.  This module produces those pairs:
per-patch angles by inverse projection of patch centers, and per-cell
angles by forward projection of ground-plane cell centers.

Out-of-domain entries (patch centers outside the image circle, cells
behind the camera or past theta_max) become mask entries, never errors:
grids keep their full rectangular shape and carry NaN angles where the
mask is False.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import Extrinsics, InverseLut, KannalaBrandtCamera, _normalize_phi, _readonly
from .errors import ConfigError


def _readonly_bool(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=bool, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PatchGrid:
    """Angular coordinates of patch centers over a fisheye image.

    coords has shape (rows, cols, 2) holding (theta, phi) per patch;
    centers_px the matching pixel centers; valid_mask flags patches
    whose center lies inside the image circle.  Masked-out entries hold
    NaN angles.  Edge patches clipped by the image boundary keep the
    center of their actual pixel extent.
    """

    patch_size: int
    grid_dims: tuple[int, int]
    coords: np.ndarray
    valid_mask: np.ndarray
    centers_px: np.ndarray
    theta_max: float
    camera_token: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "coords", _readonly(self.coords))
        object.__setattr__(self, "centers_px", _readonly(self.centers_px))
        object.__setattr__(self, "valid_mask", _readonly_bool(self.valid_mask))
        rows, cols = self.grid_dims
        if self.coords.shape != (rows, cols, 2):
            raise ConfigError(
                f"coords shape {self.coords.shape} != (rows, cols, 2) for dims {self.grid_dims}"
            )
        if self.valid_mask.shape != (rows, cols) or self.centers_px.shape != (rows, cols, 2):
            raise ConfigError("mask/centers shapes inconsistent with grid dims")
        valid = self.coords[self.valid_mask]
        if valid.size and (
            np.any(~np.isfinite(valid))
            or np.any(valid[:, 0] < 0.0)
            or np.any(valid[:, 0] > self.theta_max + 1e-12)
            or np.any(valid[:, 1] < -np.pi)
            or np.any(valid[:, 1] >= np.pi)
        ):
            raise ConfigError("masked-in patch angles violate angular invariants")

    @property
    def n_valid(self) -> int:
        return int(np.count_nonzero(self.valid_mask))

    def flat_valid(self) -> tuple[np.ndarray, np.ndarray]:
        """(coords, centers_px) restricted to valid patches, row-major order."""
        m = self.valid_mask.reshape(-1)
        return (
            self.coords.reshape(-1, 2)[m],
            self.centers_px.reshape(-1, 2)[m],
        )


def patch_angles(
    camera: KannalaBrandtCamera,
    patch_size: int,
    lut: InverseLut | None = None,
) -> PatchGrid:
    """Angular coordinates at every patch center of a tiled image.

    The image is tiled with patch_size x patch_size cells starting at the
    top-left corner; a partial last row/column is kept with the center of
    its clipped extent.  Angles come from the inverse lookup table
    (built at the default resolution when not supplied) plus atan2.
    """
    if patch_size < 1:
        raise ConfigError(f"patch size must be >= 1, got {patch_size}")
    if lut is None:
        lut = camera.build_lut()
    w, h = camera.image_size
    cols = -(-w // patch_size)
    rows = -(-h // patch_size)
    col_start = np.arange(cols) * patch_size
    row_start = np.arange(rows) * patch_size
    cu = (col_start + np.minimum(col_start + patch_size, w)) / 2.0
    cv = (row_start + np.minimum(row_start + patch_size, h)) / 2.0
    u, v = np.meshgrid(cu, cv)

    cx, cy = camera.principal_point
    du = u - cx
    dv = v - cy
    r = np.hypot(du, dv)
    valid = r <= camera.r_max

    theta = np.full_like(r, np.nan)
    theta[valid] = lut.lookup(r[valid])
    phi = _normalize_phi(np.arctan2(dv, du))
    phi = np.where(r == 0.0, 0.0, phi)
    phi = np.where(valid, phi, np.nan)

    return PatchGrid(
        patch_size=patch_size,
        grid_dims=(rows, cols),
        coords=np.stack([theta, phi], axis=-1),
        valid_mask=valid,
        centers_px=np.stack([u, v], axis=-1),
        theta_max=camera.theta_max,
        camera_token=camera.fingerprint,
    )


@dataclass(frozen=True)
class BevGridSpec:
    """Discretization of the ground plane: dims cells spanning extent meters.

    dims = (n_x, n_y) cells, extent = (x_extent, y_extent) meters; the
    grid is centered on the world origin with cell (i, j) centered at
    x = -x_extent/2 + (i + 0.5) * resolution (and likewise in y).
    """

    dims: tuple[int, int]
    extent: tuple[float, float]
    resolution: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "extent", tuple(float(e) for e in self.extent))
        object.__setattr__(self, "resolution", float(self.resolution))
        if self.resolution <= 0.0:
            raise ConfigError(f"resolution must be positive, got {self.resolution}")
        if self.dims[0] < 1 or self.dims[1] < 1:
            raise ConfigError(f"grid dims must be positive, got {self.dims}")
        for n, e in zip(self.dims, self.extent):
            if abs(n * self.resolution - e) > self.resolution:
                raise ConfigError(
                    f"dims {self.dims} x resolution {self.resolution} "
                    f"inconsistent with extent {self.extent} (off by more than one cell)"
                )

    @classmethod
    def from_extent(cls, extent: tuple[float, float], resolution: float) -> "BevGridSpec":
        dims = (round(extent[0] / resolution), round(extent[1] / resolution))
        return cls(dims=dims, extent=extent, resolution=resolution)

    def cell_centers(self) -> np.ndarray:
        """World (x, y, 0) centers, shape (n_x, n_y, 3)."""
        nx, ny = self.dims
        xs = -self.extent[0] / 2.0 + (np.arange(nx) + 0.5) * self.resolution
        ys = -self.extent[1] / 2.0 + (np.arange(ny) + 0.5) * self.resolution
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([gx, gy, np.zeros_like(gx)], axis=-1)


@dataclass(frozen=True)
class BevGrid:
    """Ground-plane grid with per-cell angular coordinates under a camera.

    cell_world holds (x, y, 0) centers; cell_angles the projected
    (theta, phi) per cell; visibility_mask flags cells in front of the
    camera with theta <= theta_max.  Masked-out cells hold NaN angles.
    """

    spec: BevGridSpec
    cell_world: np.ndarray
    cell_angles: np.ndarray
    visibility_mask: np.ndarray
    theta_max: float
    camera_token: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "cell_world", _readonly(self.cell_world))
        object.__setattr__(self, "cell_angles", _readonly(self.cell_angles))
        object.__setattr__(self, "visibility_mask", _readonly_bool(self.visibility_mask))
        nx, ny = self.spec.dims
        if self.cell_world.shape != (nx, ny, 3) or self.cell_angles.shape != (nx, ny, 2):
            raise ConfigError("BEV grid array shapes inconsistent with spec dims")
        if self.visibility_mask.shape != (nx, ny):
            raise ConfigError("visibility mask shape inconsistent with spec dims")
        vis = self.cell_angles[self.visibility_mask]
        if vis.size and (
            np.any(~np.isfinite(vis))
            or np.any(vis[:, 0] < 0.0)
            or np.any(vis[:, 0] > self.theta_max + 1e-12)
        ):
            raise ConfigError("masked-in BEV angles violate angular invariants")

    @property
    def n_visible(self) -> int:
        return int(np.count_nonzero(self.visibility_mask))

    def flat_visible(self) -> tuple[np.ndarray, np.ndarray]:
        """(angles, world points) restricted to visible cells, row-major order."""
        m = self.visibility_mask.reshape(-1)
        return (
            self.cell_angles.reshape(-1, 2)[m],
            self.cell_world.reshape(-1, 3)[m],
        )


def bev_angles(
    spec: BevGridSpec,
    camera: KannalaBrandtCamera,
    extrinsics: Extrinsics,
) -> BevGrid:
    """Project ground-plane cell centers into lens angular coordinates.

    Cells sit on the z = 0 world plane (flat-ground assumption).  A cell
    is visible iff its center maps in front of the camera and within the
    lens field of view (theta <= theta_max).
    """
    world = spec.cell_centers()
    theta, phi, in_front = extrinsics.ray_angles(world)
    with np.errstate(invalid="ignore"):
        visible = in_front & (theta <= camera.theta_max)
    theta = np.where(visible, theta, np.nan)
    phi = np.where(visible, phi, np.nan)
    return BevGrid(
        spec=spec,
        cell_world=world,
        cell_angles=np.stack([theta, phi], axis=-1),
        visibility_mask=visible,
        theta_max=camera.theta_max,
        camera_token=camera.fingerprint,
    )
