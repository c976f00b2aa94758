"""Reference attention kernels with pluggable position encoding.

Single-layer scaled dot-product attention over token grids, in the two
configurations the angular machinery feeds: self-attention over image
patch tokens and cross-attention from BEV cell queries to image patch
keys.  Position enters through one of four encodings:

    none        no positional signal
    sinusoidal  additive two-axis sin/cos added to features before projection
    axial_rope  rotary over pixel coordinates normalized to [0, 1]
    fishrope    rotary over lens angular coordinates (theta, phi)

Rotations act per head on query and key projections; logits are
temperature-scaled inner products; softmax rows are max-subtracted and
exclude masked keys entirely (equivalent to -inf logits), so weights
over valid keys always sum to 1.

Everything here is a pure function of immutable inputs; no state is
shared between calls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rope
from .angular import BevGrid, PatchGrid
from .camera import _readonly
from .errors import ConfigError, EmptyAttentionError, ShapeError
from .rope import ENCODINGS, RotaryConfig

_ROTARY = ("axial_rope", "fishrope")


@dataclass(frozen=True)
class TokenGrid:
    """Feature vectors bound to positions.

    coords holds (theta, phi) angular pairs, or (u, v) pixel pairs for
    Cartesian encodings; mask flags usable tokens.  Masked-in tokens
    must carry finite coords.  camera_token identifies the camera the
    coords were derived from; cross-attention refuses to mix grids from
    different cameras.
    """

    features: np.ndarray
    coords: np.ndarray
    mask: np.ndarray
    camera_token: str | None = None

    def __post_init__(self) -> None:
        features = _readonly(self.features)
        coords = _readonly(self.coords)
        mask = np.array(self.mask, dtype=bool, copy=True)
        mask.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "mask", mask)
        n = features.shape[0] if features.ndim == 2 else -1
        if features.ndim != 2:
            raise ShapeError(f"features must be 2-D, got shape {features.shape}")
        if coords.shape != (n, 2):
            raise ShapeError(f"coords must have shape ({n}, 2), got {coords.shape}")
        if mask.shape != (n,):
            raise ShapeError(f"mask must have shape ({n},), got {mask.shape}")
        if np.any(~np.isfinite(coords[mask])):
            raise ConfigError("masked-in tokens carry non-finite coords")

    @property
    def n_tokens(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def tokens_from_patches(
    grid: PatchGrid, features: np.ndarray, use_pixels: bool = False
) -> TokenGrid:
    """Flatten a patch grid into tokens (row-major), one feature row per patch.

    use_pixels binds tokens to patch-center pixels instead of angles,
    for the Cartesian encodings.  Masked-out entries get zeroed coords.
    """
    coords = (grid.centers_px if use_pixels else grid.coords).reshape(-1, 2)
    mask = grid.valid_mask.reshape(-1)
    coords = np.where(mask[:, None], coords, 0.0)
    return TokenGrid(
        features=features, coords=coords, mask=mask, camera_token=grid.camera_token
    )


def tokens_from_bev(
    grid: BevGrid, features: np.ndarray, pixels: np.ndarray | None = None
) -> TokenGrid:
    """Flatten a BEV grid into query tokens (row-major).

    Pass per-cell projected pixels to bind tokens to pixel coordinates
    for the Cartesian encodings.
    """
    coords = (pixels if pixels is not None else grid.cell_angles).reshape(-1, 2)
    mask = grid.visibility_mask.reshape(-1)
    coords = np.where(mask[:, None], coords, 0.0)
    return TokenGrid(
        features=features, coords=coords, mask=mask, camera_token=grid.camera_token
    )


@dataclass(frozen=True)
class ProjectionWeights:
    """Query/key/value projection matrices, each (model_dim, model_dim)."""

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray

    def __post_init__(self) -> None:
        for name in ("wq", "wk", "wv"):
            mat = _readonly(getattr(self, name))
            object.__setattr__(self, name, mat)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise ShapeError(f"{name} must be square, got shape {mat.shape}")
        if not (self.wq.shape == self.wk.shape == self.wv.shape):
            raise ShapeError("projection matrices must share one shape")

    @property
    def dim(self) -> int:
        return self.wq.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "ProjectionWeights":
        eye = np.eye(dim)
        return cls(wq=eye, wk=eye, wv=eye)

    @classmethod
    def random(cls, dim: int, seed: int = 0) -> "ProjectionWeights":
        rng = np.random.default_rng(seed)
        scale = 1.0 / np.sqrt(dim)
        return cls(*(rng.standard_normal((dim, dim)) * scale for _ in range(3)))


@dataclass(frozen=True)
class AttentionConfig:
    """Head layout, encoding choice, and logit temperature.

    head_dim must equal rotary.dim for the rotary encodings; image_size
    is required by axial_rope for pixel normalization.  temperature
    defaults to 1/sqrt(head_dim).
    """

    heads: int = 1
    head_dim: int = 8
    encoding: str = "none"
    rotary: RotaryConfig | None = None
    temperature: float | None = None
    image_size: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.encoding not in ENCODINGS:
            raise ConfigError(
                f"unknown encoding {self.encoding!r}; expected one of {ENCODINGS}"
            )
        if self.heads < 1 or self.head_dim < 1:
            raise ConfigError("heads and head_dim must be positive")
        if self.encoding in _ROTARY:
            if self.rotary is None:
                raise ConfigError(f"{self.encoding} requires a RotaryConfig")
            if self.rotary.dim != self.head_dim:
                raise ConfigError(
                    f"rotary dim {self.rotary.dim} must equal head_dim {self.head_dim}"
                )
        if self.encoding == "axial_rope" and self.image_size is None:
            raise ConfigError("axial_rope requires image_size for pixel normalization")
        if self.encoding == "sinusoidal" and self.model_dim % 4 != 0:
            raise ConfigError("sinusoidal encoding requires model_dim divisible by 4")

    @property
    def model_dim(self) -> int:
        return self.heads * self.head_dim

    @property
    def scale(self) -> float:
        return (
            self.temperature
            if self.temperature is not None
            else 1.0 / np.sqrt(self.head_dim)
        )


def _rotary_positions(coords: np.ndarray, config: AttentionConfig) -> np.ndarray:
    """Rotation inputs per token: raw angles, or pixels normalized to [0, 1]."""
    if config.encoding == "axial_rope":
        w, h = config.image_size
        return coords / np.array([float(w), float(h)])
    return coords


def _embed(grid: TokenGrid, config: AttentionConfig) -> np.ndarray:
    """Token features with additive PE applied where the encoding calls for it."""
    x = grid.features
    if x.shape[1] != config.model_dim:
        raise ShapeError(
            f"feature dim {x.shape[1]} does not match model dim {config.model_dim}"
        )
    if config.encoding == "sinusoidal":
        pe = rope.sinusoidal_pe_batch(grid.coords, config.model_dim)
        x = x + np.where(grid.mask[:, None], pe, 0.0)
    return x


def _project_heads(
    x: np.ndarray, coords: np.ndarray, weight: np.ndarray, config: AttentionConfig,
    rotate: bool,
) -> np.ndarray:
    """Project and (for q/k under rotary encodings) rotate; returns (heads, N, head_dim)."""
    n = x.shape[0]
    proj = x @ weight.T
    heads = proj.reshape(n, config.heads, config.head_dim)
    if rotate and config.encoding in _ROTARY:
        positions = _rotary_positions(coords, config)
        flat = heads.reshape(n * config.heads, config.head_dim)
        rotated = rope.apply_rotary_batch(
            flat, np.repeat(positions, config.heads, axis=0), config.rotary
        )
        heads = rotated.reshape(n, config.heads, config.head_dim)
    return np.moveaxis(heads, 1, 0)


def logit_matrix(
    queries: TokenGrid,
    keys: TokenGrid,
    weights: ProjectionWeights,
    config: AttentionConfig,
) -> np.ndarray:
    """Raw pre-softmax logits, (N_q, N_k) for one head, (heads, N_q, N_k) otherwise.

    No masking is applied here; this is the test surface for the
    relative-position properties.
    """
    if weights.dim != config.model_dim:
        raise ShapeError(
            f"weights dim {weights.dim} does not match model dim {config.model_dim}"
        )
    q = _project_heads(_embed(queries, config), queries.coords, weights.wq, config, True)
    k = _project_heads(_embed(keys, config), keys.coords, weights.wk, config, True)
    logits = config.scale * np.einsum("hqd,hkd->hqk", q, k)
    return logits[0] if config.heads == 1 else logits


def _masked_softmax(logits: np.ndarray, key_mask: np.ndarray) -> np.ndarray:
    """Row softmax over valid keys only; max-subtracted for stability.

    logits has shape (heads, N_q, N_k).  Rows are assumed to have at
    least one valid key; masked keys get exactly zero weight.
    """
    neg = np.where(key_mask[None, None, :], logits, -np.inf)
    peak = np.max(neg, axis=-1, keepdims=True)
    expd = np.exp(neg - peak)
    expd = np.where(key_mask[None, None, :], expd, 0.0)
    return expd / np.sum(expd, axis=-1, keepdims=True)


def self_attention(
    tokens: TokenGrid, weights: ProjectionWeights, config: AttentionConfig
) -> np.ndarray:
    """Single-layer self-attention over a token grid.

    Queries and keys carry the configured position encoding; masked
    tokens neither attend nor get attended to, and their output rows are
    zero.  Raises EmptyAttentionError when no token is valid.
    """
    if not np.any(tokens.mask):
        raise EmptyAttentionError("self-attention over a fully masked token grid")
    logits = logit_matrix(tokens, tokens, weights, config)
    logits = logits.reshape(config.heads, tokens.n_tokens, tokens.n_tokens)
    attn = _masked_softmax(logits, tokens.mask)
    x = _embed(tokens, config)
    v = _project_heads(x, tokens.coords, weights.wv, config, rotate=False)
    out_heads = np.einsum("hqk,hkd->hqd", attn, v)
    out = np.moveaxis(out_heads, 0, 1).reshape(tokens.n_tokens, config.model_dim)
    return np.where(tokens.mask[:, None], out, 0.0)


def cross_attention(
    queries: TokenGrid,
    keys: TokenGrid,
    weights: ProjectionWeights,
    config: AttentionConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Dense cross-attention from query tokens to key tokens.

    Both grids must come from the same camera so their coordinates share
    one angular space.  Returns (outputs, flags); a query that is masked
    out, or that faces no valid key, yields a zero row and a False flag.
    """
    if (
        queries.camera_token is not None
        and keys.camera_token is not None
        and queries.camera_token != keys.camera_token
    ):
        raise ConfigError("query and key grids come from different cameras")
    flags = queries.mask & bool(np.any(keys.mask))
    if not np.any(flags):
        return np.zeros((queries.n_tokens, config.model_dim)), flags
    logits = logit_matrix(queries, keys, weights, config)
    logits = logits.reshape(config.heads, queries.n_tokens, keys.n_tokens)
    attn = _masked_softmax(logits, keys.mask)
    v = _project_heads(_embed(keys, config), keys.coords, weights.wv, config, rotate=False)
    out_heads = np.einsum("hqk,hkd->hqd", attn, v)
    out = np.moveaxis(out_heads, 0, 1).reshape(queries.n_tokens, config.model_dim)
    return np.where(flags[:, None], out, 0.0), flags


def self_attention_jacobian(
    tokens: TokenGrid, weights: ProjectionWeights, config: AttentionConfig
) -> np.ndarray:
    """Analytic Jacobian of self_attention outputs w.r.t. input features.

    Chain rule through the (linear) position rotation and the softmax;
    single head only.  Returns shape (N*D, N*D) with the (i, m) block
    holding d out_i / d x_m.
    """
    if config.heads != 1:
        raise ConfigError("analytic jacobian is implemented for heads=1")
    if not np.any(tokens.mask):
        raise EmptyAttentionError("self-attention over a fully masked token grid")
    n, d = tokens.n_tokens, config.model_dim
    x = _embed(tokens, config)

    if config.encoding in _ROTARY:
        positions = _rotary_positions(tokens.coords, config)
        rot = np.stack(
            [rope.rotation_matrix(positions[i], config.rotary) for i in range(n)]
        )
    else:
        rot = np.broadcast_to(np.eye(d), (n, d, d))
    bq = rot @ weights.wq  # bq[i] = A_i Wq
    bk = rot @ weights.wk
    q = np.einsum("nij,nj->ni", bq, x)
    k = np.einsum("nij,nj->ni", bk, x)
    v = x @ weights.wv.T
    tau = config.scale
    logits = tau * (q @ k.T)
    attn = _masked_softmax(logits[None], tokens.mask)[0]

    # g[j] = d logits_ij / d x_m, nonzero only when m is i or j;
    # d a_ij / d x_m = a_ij * (g[j] - sum_l a_il g[l]).
    jac = np.zeros((n, d, n, d))
    valid = np.flatnonzero(tokens.mask)
    for i in valid:
        for m in valid:
            g = np.zeros((n, d))
            for j in valid:
                row = np.zeros(d)
                if m == i:
                    row += tau * (k[j] @ bq[i])
                if m == j:
                    row += tau * (q[i] @ bk[j])
                g[j] = row
            expected = attn[i] @ g
            block = np.zeros((d, d))
            for j in valid:
                da = attn[i, j] * (g[j] - expected)
                block += np.outer(v[j], da)
            block += attn[i, m] * weights.wv
            jac[i, :, m, :] = block
    return jac.reshape(n * d, n * d)
