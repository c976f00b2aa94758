"""Kannala-Brandt fisheye camera geometry.

Radial model: a ray with incidence angle theta (radians from the optical
axis) lands at image radius

    r(theta) = k1*theta + k2*theta**3 + k3*theta**5 + ...

and at pixel coordinates

    u = cx + r(theta) * cos(phi)
    v = cy + r(theta) * sin(phi)

where phi is the azimuth of the ray's image-plane projection about the
principal point.  The inverse map (radius -> angle) has no closed form;
it is solved with Newton's method seeded at the paraxial estimate
theta0 = r / k1, or read from a precomputed lookup table with linear
interpolation.

Conventions: the camera frame is right-handed with the optical axis
along +z; phi = atan2(y, x) reported in [-pi, pi); the degenerate
on-axis case (r = 0) returns phi = 0.  Pixels up to a small band
(CLAMP_BAND_FRACTION * r_max) beyond the image circle are clamped onto
it rather than extrapolating the polynomial outside its fitted range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    BehindCameraError,
    ConfigError,
    DomainError,
    OutOfImageCircleError,
)

# Fraction of r_max tolerated (and clamped) beyond the image circle.
CLAMP_BAND_FRACTION = 1e-3

# Sample count used to verify strict monotonicity of r(theta) at construction.
_MONOTONE_SAMPLES = 1024

DEFAULT_NEWTON_ITERATIONS = 5
FULL_CONVERGENCE_TOL = 1e-12
FULL_CONVERGENCE_MAX_ITER = 50

DEFAULT_LUT_RESOLUTION = 4096


@dataclass(frozen=True)
class AngularCoord:
    """Ray direction in lens spherical coordinates.

    theta: incidence angle from the optical axis, radians, >= 0.
    phi: azimuth about the principal point, radians in [-pi, pi).
    """

    theta: float
    phi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise DomainError(f"non-finite angular coordinate ({self.theta}, {self.phi})")
        if self.theta < 0.0:
            raise DomainError(f"incidence angle must be >= 0, got {self.theta}")
        if not (-math.pi <= self.phi <= math.pi):
            raise DomainError(f"azimuth must lie in [-pi, pi], got {self.phi}")

    def __iter__(self):
        return iter((self.theta, self.phi))


def _normalize_phi(phi):
    """Map azimuth onto the half-open interval [-pi, pi)."""
    return np.where(phi >= math.pi, phi - 2.0 * math.pi, phi)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class KannalaBrandtCamera:
    """Intrinsic fisheye model with radial polynomial coefficients.

    coeffs: (k1, ..., kK) applied to odd powers of theta; k1 > 0.
    principal_point: (cx, cy) in pixels, inside the image bounds.
    theta_max: maximum incidence angle in radians, in (0, pi].
    image_size: (width, height) in pixels.

    Construction verifies that r(theta) is strictly increasing on
    [0, theta_max] by sampling its derivative; it fails otherwise.
    Instances are immutable and safe to share across threads.
    """

    coeffs: tuple[float, ...]
    principal_point: tuple[float, float]
    theta_max: float
    image_size: tuple[int, int]

    def __post_init__(self) -> None:
        coeffs = tuple(float(k) for k in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(
            self, "principal_point", tuple(float(c) for c in self.principal_point)
        )
        object.__setattr__(self, "theta_max", float(self.theta_max))
        object.__setattr__(self, "image_size", tuple(int(s) for s in self.image_size))

        if len(coeffs) < 1:
            raise ConfigError("need at least one radial coefficient")
        if not all(math.isfinite(k) for k in coeffs):
            raise ConfigError(f"non-finite radial coefficients {coeffs}")
        if coeffs[0] <= 0.0:
            raise ConfigError(f"k1 must be positive, got {coeffs[0]}")
        if not (0.0 < self.theta_max <= math.pi) or not math.isfinite(self.theta_max):
            raise ConfigError(f"theta_max must lie in (0, pi], got {self.theta_max}")
        w, h = self.image_size
        if w < 1 or h < 1:
            raise ConfigError(f"image size must be positive, got {self.image_size}")
        cx, cy = self.principal_point
        if not (0.0 <= cx <= w and 0.0 <= cy <= h):
            raise ConfigError(
                f"principal point {self.principal_point} outside image bounds {self.image_size}"
            )
        thetas = np.linspace(0.0, self.theta_max, _MONOTONE_SAMPLES)
        if np.any(self.radial_derivative(thetas) <= 0.0):
            raise ConfigError(
                "radial polynomial is not strictly increasing on [0, theta_max]"
            )

    @cached_property
    def r_max(self) -> float:
        """Image-circle radius in pixels: r(theta_max)."""
        return float(self.radial(self.theta_max))

    @cached_property
    def fingerprint(self) -> str:
        """Deterministic identity token; grids derived from this camera carry it."""
        return (
            f"kb|coeffs={self.coeffs!r}|pp={self.principal_point!r}"
            f"|theta_max={self.theta_max!r}|size={self.image_size!r}"
        )

    # -- forward model ------------------------------------------------------

    def radial(self, theta):
        """Evaluate r(theta) = sum_j k_j theta^(2j-1) (Horner in theta^2)."""
        theta = np.asarray(theta, dtype=np.float64)
        t2 = theta * theta
        acc = np.zeros_like(theta)
        for k in reversed(self.coeffs):
            acc = acc * t2 + k
        return acc * theta

    def radial_derivative(self, theta):
        """Evaluate r'(theta) = sum_j (2j-1) k_j theta^(2j-2)."""
        theta = np.asarray(theta, dtype=np.float64)
        t2 = theta * theta
        acc = np.zeros_like(theta)
        for j in reversed(range(len(self.coeffs))):
            acc = acc * t2 + (2 * j + 1) * self.coeffs[j]
        return acc

    def project(self, theta, phi):
        """Map incidence/azimuth angles to pixel coordinates (u, v).

        Accepts scalars or broadcastable arrays.  Raises DomainError if any
        theta falls outside [0, theta_max].
        """
        theta = np.asarray(theta, dtype=np.float64)
        phi = np.asarray(phi, dtype=np.float64)
        if not np.all(np.isfinite(theta)) or not np.all(np.isfinite(phi)):
            raise DomainError("non-finite projection input")
        bad = (theta < 0.0) | (theta > self.theta_max)
        if np.any(bad):
            offending = float(np.asarray(theta)[bad].flat[0])
            raise DomainError(
                f"incidence angle {offending} outside [0, {self.theta_max}]"
            )
        r = self.radial(theta)
        cx, cy = self.principal_point
        u = cx + r * np.cos(phi)
        v = cy + r * np.sin(phi)
        if u.ndim == 0:
            return float(u), float(v)
        return u, v

    # -- inverse model ------------------------------------------------------

    def radius_to_theta(self, r, iterations: int | None = None):
        """Invert the radial polynomial: find theta with r(theta) = r.

        iterations=None runs Newton to full convergence (|step| below
        FULL_CONVERGENCE_TOL, at most FULL_CONVERGENCE_MAX_ITER steps);
        an integer runs exactly that many fixed iterations.  The iterate
        starts at the paraxial estimate r / k1 and is clamped to
        [0, theta_max] so the polynomial is never evaluated outside its
        fitted range.  Radii within the clamp band above r_max are
        clamped onto the image circle; radii beyond it raise
        OutOfImageCircleError.
        """
        r = np.asarray(r, dtype=np.float64)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        if not np.all(np.isfinite(r)):
            raise DomainError("non-finite radius")
        if np.any(r < 0.0):
            raise DomainError(f"negative radius {float(r[r < 0.0][0])}")
        limit = self.r_max * (1.0 + CLAMP_BAND_FRACTION)
        beyond = r > limit
        if np.any(beyond):
            raise OutOfImageCircleError(
                f"radius {float(r[beyond][0])} beyond image circle "
                f"(r_max={self.r_max}, clamp limit={limit})"
            )
        r = np.minimum(r, self.r_max)

        theta = np.clip(r / self.coeffs[0], 0.0, self.theta_max)
        if iterations is None:
            for _ in range(FULL_CONVERGENCE_MAX_ITER):
                step = (self.radial(theta) - r) / self.radial_derivative(theta)
                theta = np.clip(theta - step, 0.0, self.theta_max)
                if np.max(np.abs(step)) < FULL_CONVERGENCE_TOL:
                    break
        else:
            if iterations < 1:
                raise DomainError(f"iteration count must be >= 1, got {iterations}")
            for _ in range(iterations):
                step = (self.radial(theta) - r) / self.radial_derivative(theta)
                theta = np.clip(theta - step, 0.0, self.theta_max)
        return float(theta[0]) if scalar else theta

    def unproject_newton(
        self, u, v, iterations: int | None = DEFAULT_NEWTON_ITERATIONS
    ):
        """Recover (theta, phi) from pixel coordinates by Newton inversion.

        Returns an AngularCoord for scalar input, or (theta, phi) arrays
        for array input.  phi = 0 at the principal point, where the
        azimuth is undefined.
        """
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        scalar = u.ndim == 0 and v.ndim == 0
        if not np.all(np.isfinite(u)) or not np.all(np.isfinite(v)):
            raise DomainError("non-finite pixel coordinates")
        cx, cy = self.principal_point
        du = u - cx
        dv = v - cy
        r = np.hypot(du, dv)
        theta = self.radius_to_theta(r, iterations)
        phi = _normalize_phi(np.arctan2(dv, du))
        phi = np.where(np.atleast_1d(r) == 0.0, 0.0, np.atleast_1d(phi))
        if scalar:
            return AngularCoord(float(np.asarray(theta)), float(phi[0]))
        return np.asarray(theta), phi.reshape(np.broadcast(u, v).shape)

    def build_lut(self, resolution: int = DEFAULT_LUT_RESOLUTION) -> "InverseLut":
        """Tabulate the inverse radial map on a uniform radius grid.

        Built once per camera with fully converged Newton; lookups then
        cost one linear interpolation.
        """
        if resolution < 2:
            raise ConfigError(f"LUT resolution must be >= 2, got {resolution}")
        radii = np.linspace(0.0, self.r_max, resolution)
        entries = self.radius_to_theta(radii, iterations=None)
        return InverseLut(
            entries=entries,
            resolution=resolution,
            r_max=self.r_max,
            theta_max=self.theta_max,
        )

    def angular_extent_ratio(self, pixel_offset: float) -> float:
        """Incidence-angle change per fixed pixel offset: center vs periphery.

        Returns dtheta([0, d]) / dtheta([0.9*r_max, 0.9*r_max + d]) for
        offset d, a measure of how much more angle a central pixel step
        subtends than a peripheral one.  Equals 1 for a distortion-free
        (linear) model.
        """
        pixel_offset = float(pixel_offset)
        if not pixel_offset > 0.0:
            raise DomainError(f"pixel offset must be positive, got {pixel_offset}")
        if 0.9 * self.r_max + pixel_offset > self.r_max:
            raise DomainError(
                f"pixel offset {pixel_offset} too large for periphery interval "
                f"(must be <= 0.1 * r_max = {0.1 * self.r_max})"
            )
        center = self.radius_to_theta(pixel_offset, iterations=None)
        edge0 = self.radius_to_theta(0.9 * self.r_max, iterations=None)
        edge1 = self.radius_to_theta(0.9 * self.r_max + pixel_offset, iterations=None)
        return float(center / (edge1 - edge0))


@dataclass(frozen=True)
class InverseLut:
    """Uniformly spaced radius -> incidence-angle table.

    entries[i] holds theta at radius i * r_max / (resolution - 1),
    computed to full Newton convergence.  Entries are strictly
    increasing, start at 0, and end at theta_max.
    """

    entries: np.ndarray
    resolution: int
    r_max: float
    theta_max: float

    def __post_init__(self) -> None:
        entries = _readonly(self.entries)
        object.__setattr__(self, "entries", entries)
        if entries.ndim != 1 or len(entries) != self.resolution or self.resolution < 2:
            raise ConfigError("LUT entries must be a 1-D array of length `resolution`")
        if entries[0] != 0.0:
            raise ConfigError(f"LUT must start at 0, got {entries[0]}")
        if np.any(np.diff(entries) <= 0.0):
            raise ConfigError("LUT entries must be strictly increasing")
        if abs(entries[-1] - self.theta_max) > 1e-9:
            raise ConfigError(
                f"LUT endpoint {entries[-1]} does not reach theta_max {self.theta_max}"
            )

    def lookup(self, r):
        """Linear interpolation of theta at radius r (clamp band as in Newton)."""
        r = np.asarray(r, dtype=np.float64)
        scalar = r.ndim == 0
        if not np.all(np.isfinite(r)):
            raise DomainError("non-finite radius")
        if np.any(r < 0.0):
            raise DomainError("negative radius")
        limit = self.r_max * (1.0 + CLAMP_BAND_FRACTION)
        if np.any(r > limit):
            raise OutOfImageCircleError(
                f"radius beyond image circle (r_max={self.r_max}, clamp limit={limit})"
            )
        r = np.minimum(r, self.r_max)
        step = self.r_max / (self.resolution - 1)
        pos = r / step
        lo = np.minimum(pos.astype(np.int64), self.resolution - 2)
        frac = pos - lo
        theta = self.entries[lo] * (1.0 - frac) + self.entries[lo + 1] * frac
        return float(theta) if scalar else theta


@dataclass(frozen=True)
class Extrinsics:
    """Rigid world -> camera transform: p_cam = rotation @ p_world + translation.

    rotation must be orthonormal with determinant +1 within 1e-9.
    """

    rotation: np.ndarray
    translation: np.ndarray

    _ORTHO_TOL = 1e-9

    def __post_init__(self) -> None:
        rot = _readonly(self.rotation)
        t = _readonly(self.translation)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", t)
        if rot.shape != (3, 3) or t.shape != (3,):
            raise ConfigError(
                f"extrinsics need a 3x3 rotation and 3-vector translation, "
                f"got {rot.shape} and {t.shape}"
            )
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > self._ORTHO_TOL:
            raise ConfigError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(rot) - 1.0) > self._ORTHO_TOL:
            raise ConfigError("rotation determinant is not +1 within 1e-9")

    @classmethod
    def identity(cls) -> "Extrinsics":
        return cls(rotation=np.eye(3), translation=np.zeros(3))

    @classmethod
    def look_at(cls, position, target, up=(0.0, 0.0, 1.0), roll: float = 0.0) -> "Extrinsics":
        """Camera at `position` with the optical axis (+z) toward `target`.

        The camera x axis is chosen perpendicular to the world `up` hint,
        y completes the right-handed frame (pointing "down" for the
        conventional up).  `roll` then rotates the image axes about the
        optical axis (positive x-toward-y); e.g. roll = pi/2 points the
        azimuth seam (phi = +/-pi, the -x image direction) toward `up`.
        """
        position = np.asarray(position, dtype=np.float64)
        target = np.asarray(target, dtype=np.float64)
        up = np.asarray(up, dtype=np.float64)
        forward = target - position
        norm = np.linalg.norm(forward)
        if norm == 0.0:
            raise ConfigError("look_at target coincides with camera position")
        z = forward / norm
        x = np.cross(z, up)
        if np.linalg.norm(x) < 1e-12:
            # Optical axis parallel to `up`: pick a fixed lateral reference.
            x = np.cross(z, np.array([1.0, 0.0, 0.0]))
            if np.linalg.norm(x) < 1e-12:
                x = np.cross(z, np.array([0.0, 1.0, 0.0]))
        x = x / np.linalg.norm(x)
        y = np.cross(z, x)
        if roll:
            c, s = math.cos(roll), math.sin(roll)
            x, y = c * x + s * y, -s * x + c * y
        rot_cam_to_world = np.stack([x, y, z], axis=1)
        rotation = rot_cam_to_world.T
        return cls(rotation=rotation, translation=-rotation @ position)

    @cached_property
    def camera_center(self) -> np.ndarray:
        """Camera position in world coordinates (-R^T t)."""
        return _readonly(-self.rotation.T @ self.translation)

    def transform(self, points):
        """Apply world -> camera to points of shape (..., 3)."""
        points = np.asarray(points, dtype=np.float64)
        if points.shape[-1] != 3:
            raise ConfigError(f"points must have shape (..., 3), got {points.shape}")
        return points @ self.rotation.T + self.translation

    def compose(self, inner: "Extrinsics") -> "Extrinsics":
        """Rigid composition: (self o inner)(p) = self(inner(p))."""
        return Extrinsics(
            rotation=self.rotation @ inner.rotation,
            translation=self.rotation @ inner.translation + self.translation,
        )

    def ray_angles(self, points):
        """Per-point (theta, phi, in_front) for world points of shape (..., 3).

        theta is the angle to the optical axis, phi the azimuth in the
        camera frame; entries behind the camera (z_cam <= 0) are NaN
        with in_front False.  Does not raise: intended for grid masking.
        """
        p_cam = self.transform(points)
        x, y, z = p_cam[..., 0], p_cam[..., 1], p_cam[..., 2]
        in_front = z > 0.0
        rho = np.hypot(x, y)
        theta = np.where(in_front, np.arctan2(rho, z), np.nan)
        phi = _normalize_phi(np.arctan2(y, x))
        phi = np.where(in_front, np.where(rho == 0.0, 0.0, phi), np.nan)
        return theta, phi, in_front

    def world_to_camera_ray(self, world_point) -> AngularCoord:
        """Angles of a single world point; raises BehindCameraError for z_cam <= 0."""
        world_point = np.asarray(world_point, dtype=np.float64)
        theta, phi, in_front = self.ray_angles(world_point.reshape(1, 3))
        if not in_front[0]:
            raise BehindCameraError(
                f"world point {world_point.tolist()} is behind the camera"
            )
        return AngularCoord(float(theta[0]), float(phi[0]))
