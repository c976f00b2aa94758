"""Rotary position machinery over lens angular coordinates.

A feature vector of even dimension d is split into a theta-subspace and
a phi-subspace.  Within a subspace, consecutive dimension pairs
(2i, 2i+1) form rotation planes; plane i is rotated by angle * freqs[i]
where the frequency schedule is

    freqs[i] = base ** (-2 * i / subspace_dims),   i = 0 .. subspace_dims/2 - 1

so freqs[0] = 1 and frequencies decay geometrically.  Each subspace gets
its own schedule over its own dimension count, which keeps freqs[0] = 1
under any split.

Because every rotation is orthogonal, inner products of rotated vectors
depend only on coordinate differences:

    <rot(q, m), rot(k, n)> = <q, rot(k, n - m)>

which `relative_logit` evaluates directly.  Angles are consumed as raw
radians (theta in [0, theta_max], phi in [-pi, pi)); an optional
angle_scale multiplies both before rotation.  Azimuth differences are
NOT wrapped by default, so a pair straddling the phi = +/-pi seam is
treated as far apart by every non-integer frequency; RotaryConfig.wrap_phi
switches relative computations to the wrapped difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, ShapeError

# Closed set of position encodings understood by the attention kernels.
ENCODINGS = ("none", "sinusoidal", "axial_rope", "fishrope")

DEFAULT_BASE = 10000.0


@dataclass(frozen=True)
class FrequencySchedule:
    """Per-plane rotation frequencies: positive, strictly decreasing, freqs[0] = 1."""

    freqs: np.ndarray

    def __post_init__(self) -> None:
        freqs = np.array(self.freqs, dtype=np.float64)
        freqs.setflags(write=False)
        object.__setattr__(self, "freqs", freqs)
        if freqs.ndim != 1 or len(freqs) < 1:
            raise ConfigError("schedule must be a non-empty 1-D array")
        if freqs[0] != 1.0:
            raise ConfigError(f"schedule must start at 1, got {freqs[0]}")
        if np.any(freqs <= 0.0):
            raise ConfigError("schedule frequencies must be positive")
        if np.any(np.diff(freqs) >= 0.0):
            raise ConfigError("schedule frequencies must be strictly decreasing")

    @property
    def planes(self) -> int:
        return len(self.freqs)


def make_schedule(subspace_dims: int, base: float = DEFAULT_BASE) -> FrequencySchedule:
    """Geometric frequency schedule for a rotary subspace of even dimension."""
    if subspace_dims < 2 or subspace_dims % 2 != 0:
        raise ConfigError(f"subspace dims must be even and >= 2, got {subspace_dims}")
    if not base > 1.0:
        raise ConfigError(f"frequency base must exceed 1, got {base}")
    i = np.arange(subspace_dims // 2, dtype=np.float64)
    return FrequencySchedule(freqs=base ** (-2.0 * i / subspace_dims))


@dataclass(frozen=True)
class RotaryConfig:
    """Dimension split and frequency base for angular rotary embeddings.

    dim: total embedding dimension (even).
    theta_dims: dimensions allocated to the theta-subspace (even,
        0 <= theta_dims <= dim); defaults to an equal dim/2 split.
        theta_dims = dim gives the theta-only variant.
    base: frequency base shared by both subspace schedules.
    angle_scale: multiplies both angles before rotation (default 1,
        i.e. raw radians).
    wrap_phi: wrap azimuth differences into [-pi, pi) in relative-form
        computations.  Off by default; wrapping breaks exact agreement
        with the absolute form at the seam.
    """

    dim: int
    theta_dims: int | None = None
    base: float = DEFAULT_BASE
    angle_scale: float = 1.0
    wrap_phi: bool = False

    def __post_init__(self) -> None:
        if self.theta_dims is None:
            object.__setattr__(self, "theta_dims", self.dim // 2)
        if self.dim < 2 or self.dim % 2 != 0:
            raise ConfigError(f"embedding dim must be even and >= 2, got {self.dim}")
        if not (0 <= self.theta_dims <= self.dim) or self.theta_dims % 2 != 0:
            raise ConfigError(
                f"theta_dims must be even and within [0, dim], got {self.theta_dims}"
            )
        if (self.dim - self.theta_dims) % 2 != 0:
            raise ConfigError("phi subspace dimension must be even")
        if not self.base > 1.0:
            raise ConfigError(f"frequency base must exceed 1, got {self.base}")
        if not (self.angle_scale > 0.0 and math.isfinite(self.angle_scale)):
            raise ConfigError(f"angle scale must be positive, got {self.angle_scale}")

    @property
    def phi_dims(self) -> int:
        return self.dim - self.theta_dims

    @cached_property
    def theta_schedule(self) -> FrequencySchedule | None:
        return make_schedule(self.theta_dims, self.base) if self.theta_dims else None

    @cached_property
    def phi_schedule(self) -> FrequencySchedule | None:
        return make_schedule(self.phi_dims, self.base) if self.phi_dims else None


def rotate_pairs(x, angle: float, schedule: FrequencySchedule) -> np.ndarray:
    """Rotate consecutive dimension pairs of x by angle * freqs[i].

    Pair (x[2i], x[2i+1]) maps to
        (x[2i]*cos - x[2i+1]*sin,  x[2i]*sin + x[2i+1]*cos)
    with the per-plane angle angle * freqs[i].  Norm-preserving.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) != 2 * schedule.planes:
        raise ShapeError(
            f"vector length {x.shape} does not match {schedule.planes} rotation planes"
        )
    ang = angle * schedule.freqs
    c = np.cos(ang)
    s = np.sin(ang)
    out = np.empty_like(x)
    out[0::2] = x[0::2] * c - x[1::2] * s
    out[1::2] = x[0::2] * s + x[1::2] * c
    return out


def _coord_pair(coord) -> tuple[float, float]:
    a, b = coord
    return float(a), float(b)


def apply_fishrope(x, coord, config: RotaryConfig) -> np.ndarray:
    """Rotate x by its angular coordinate: theta-subspace by theta, phi-subspace by phi.

    coord is an AngularCoord or any (theta, phi) pair.  The first
    config.theta_dims entries rotate through the theta schedule, the
    remainder through the phi schedule.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) != config.dim:
        raise ShapeError(f"vector length {x.shape} does not match dim {config.dim}")
    theta, phi = _coord_pair(coord)
    out = x.copy()
    td = config.theta_dims
    if config.theta_schedule is not None:
        out[:td] = rotate_pairs(x[:td], config.angle_scale * theta, config.theta_schedule)
    if config.phi_schedule is not None:
        out[td:] = rotate_pairs(x[td:], config.angle_scale * phi, config.phi_schedule)
    return out


def apply_axial_rope(x, pixel, config: RotaryConfig, image_size) -> np.ndarray:
    """Cartesian baseline: the same rotation driven by normalized pixel coordinates.

    (u, v) is normalized to [0, 1] by the image width and height and
    substituted for (theta, phi).
    """
    u, v = _coord_pair(pixel)
    w, h = image_size
    return apply_fishrope(x, (u / float(w), v / float(h)), config)


def apply_rotary_batch(x, positions, config: RotaryConfig) -> np.ndarray:
    """Vectorized rotation of rows of x (N, dim) by positions (N, 2).

    positions carry (theta, phi) pairs, or normalized pixel pairs for
    the Cartesian baseline; rows rotate independently.
    """
    x = np.asarray(x, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != config.dim:
        raise ShapeError(f"features must have shape (N, {config.dim}), got {x.shape}")
    if positions.shape != (x.shape[0], 2):
        raise ShapeError(
            f"positions must have shape ({x.shape[0]}, 2), got {positions.shape}"
        )
    out = x.copy()
    td = config.theta_dims
    for offset, sched, angle in (
        (0, config.theta_schedule, positions[:, 0]),
        (td, config.phi_schedule, positions[:, 1]),
    ):
        if sched is None:
            continue
        block = x[:, offset : offset + 2 * sched.planes]
        ang = config.angle_scale * angle[:, None] * sched.freqs[None, :]
        c = np.cos(ang)
        s = np.sin(ang)
        even = block[:, 0::2]
        odd = block[:, 1::2]
        out[:, offset : offset + 2 * sched.planes : 2] = even * c - odd * s
        out[:, offset + 1 : offset + 2 * sched.planes : 2] = even * s + odd * c
    return out


def relative_logit(q, k, delta, config: RotaryConfig) -> float:
    """Attention logit from coordinate differences alone.

    Computes <q_theta, rot(k_theta, dtheta)> + <q_phi, rot(k_phi, dphi)>
    for delta = (dtheta, dphi) = coord_k - coord_q, which equals the
    inner product of the absolutely rotated q and k.  With
    config.wrap_phi, dphi is first wrapped into [-pi, pi).
    """
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    if q.shape != (config.dim,) or k.shape != (config.dim,):
        raise ShapeError(
            f"q and k must have shape ({config.dim},), got {q.shape} and {k.shape}"
        )
    dtheta, dphi = _coord_pair(delta)
    if config.wrap_phi:
        dphi = math.remainder(dphi, 2.0 * math.pi)
        if dphi == math.pi:
            dphi = -math.pi
    td = config.theta_dims
    total = 0.0
    if config.theta_schedule is not None:
        rotated = rotate_pairs(k[:td], config.angle_scale * dtheta, config.theta_schedule)
        total += float(q[:td] @ rotated)
    if config.phi_schedule is not None:
        rotated = rotate_pairs(k[td:], config.angle_scale * dphi, config.phi_schedule)
        total += float(q[td:] @ rotated)
    return total


def rotation_matrix(position, config: RotaryConfig) -> np.ndarray:
    """Explicit (dim, dim) block-diagonal rotation for one position pair.

    Mostly useful for analysis and gradient computations; the applied
    form in `apply_rotary_batch` is equivalent and cheaper.
    """
    a, b = _coord_pair(position)
    mat = np.eye(config.dim)
    td = config.theta_dims
    for offset, sched, angle in (
        (0, config.theta_schedule, a),
        (td, config.phi_schedule, b),
    ):
        if sched is None:
            continue
        for i, w in enumerate(sched.freqs):
            ang = config.angle_scale * angle * w
            c, s = math.cos(ang), math.sin(ang)
            j = offset + 2 * i
            mat[j, j] = c
            mat[j, j + 1] = -s
            mat[j + 1, j] = s
            mat[j + 1, j + 1] = c
    return mat


def sinusoidal_pe(position, dim: int, base: float = DEFAULT_BASE) -> np.ndarray:
    """Additive two-axis sinusoidal encoding of a (theta, phi) or pixel pair.

    Each axis owns dim/2 entries laid out as interleaved
    (sin(a * w_i), cos(a * w_i)) with the dim/2 geometric schedule, so
    position 0 encodes to the alternating pattern (0, 1, 0, 1, ...).
    dim must be divisible by 4.
    """
    if dim < 4 or dim % 4 != 0:
        raise ConfigError(f"sinusoidal dim must be divisible by 4, got {dim}")
    a, b = _coord_pair(position)
    half = dim // 2
    freqs = make_schedule(half, base).freqs
    out = np.empty(dim, dtype=np.float64)
    for offset, pos in ((0, a), (half, b)):
        ang = pos * freqs
        out[offset : offset + half : 2] = np.sin(ang)
        out[offset + 1 : offset + half : 2] = np.cos(ang)
    return out


def sinusoidal_pe_batch(positions, dim: int, base: float = DEFAULT_BASE) -> np.ndarray:
    """Row-wise sinusoidal_pe for positions of shape (N, 2)."""
    positions = np.asarray(positions, dtype=np.float64)
    if positions.ndim != 2 or positions.shape[1] != 2:
        raise ShapeError(f"positions must have shape (N, 2), got {positions.shape}")
    if dim < 4 or dim % 4 != 0:
        raise ConfigError(f"sinusoidal dim must be divisible by 4, got {dim}")
    half = dim // 2
    freqs = make_schedule(half, base).freqs
    out = np.empty((positions.shape[0], dim), dtype=np.float64)
    for offset, pos in ((0, positions[:, 0]), (half, positions[:, 1])):
        ang = pos[:, None] * freqs[None, :]
        out[:, offset : offset + half : 2] = np.sin(ang)
        out[:, offset + 1 : offset + half : 2] = np.cos(ang)
    return out
