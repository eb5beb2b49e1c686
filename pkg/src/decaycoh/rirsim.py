"""Image-source simulation of room impulse responses in a shoebox room.

Each wall can have its own amplitude reflection coefficient.  Images are
enumerated on the Allen-Berkley lattice; a source mirrored ``n`` times at a
wall picks up that wall's coefficient to the power ``n``.  Spherical spreading
``1/(4*pi*r)`` and the propagation delay are applied per microphone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .core import RoomSpec, unit_vector
from .decay import combine_wall_coefficients
from .errors import ImageBudgetError, ValidationError

# lattice points examined before any distance/order filtering
_LATTICE_BUDGET = 50_000_000


def _frozen_array(values, shape_hint):
    arr = np.array(values, dtype=float)
    if arr.ndim == 1 and shape_hint == 2:
        arr = arr.reshape(1, -1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SimConfig:
    """Geometry and rendering settings for one multichannel simulation.

    Args:
        room: room dimensions, speed of sound and per-axis coefficients.
        source: source position in meters.
        mics: microphone positions, shape ``(M, 3)``.
        fs: sample rate in Hz.
        length: impulse-response length in samples.
        max_order: maximum total number of reflections, ``None`` for no limit
            other than the response length.
        fractional: render delays with a windowed-sinc filter instead of
            rounding to the nearest sample.
        walls: optional six coefficients ``(x0, x1, y0, y1, z0, z1)``
            overriding the per-axis values of ``room``.
        max_images: abort if more images than this would be rendered.
        filter_taps: length of the fractional-delay filter (odd).
    """

    room: RoomSpec
    source: np.ndarray
    mics: np.ndarray
    fs: float = 16000.0
    length: int = 6400
    max_order: Optional[int] = None
    fractional: bool = True
    walls: Optional[tuple] = None
    max_images: int = 2_000_000
    filter_taps: int = 81

    def __post_init__(self):
        source = _frozen_array(self.source, 1).reshape(-1)
        mics = _frozen_array(self.mics, 2)
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "mics", mics)
        if source.shape != (3,):
            raise ValidationError("source must be a 3-vector")
        if mics.ndim != 2 or mics.shape[1] != 3 or mics.shape[0] < 1:
            raise ValidationError("mics must have shape (M, 3) with M >= 1")
        dims = self.room.dimensions
        for name, pos in [("source", source)] + [(f"mic {i}", m) for i, m in enumerate(mics)]:
            if not np.all(np.isfinite(pos)) or np.any(pos <= 0.0) or np.any(pos >= dims):
                raise ValidationError(f"{name} at {pos.tolist()} is not strictly inside the room")
        if not (math.isfinite(self.fs) and self.fs > 0.0):
            raise ValidationError("sample rate must be > 0")
        if int(self.length) != self.length or self.length <= 0:
            raise ValidationError("length must be a positive number of samples")
        object.__setattr__(self, "length", int(self.length))
        if self.max_order is not None and (int(self.max_order) != self.max_order
                                           or self.max_order < 0):
            raise ValidationError("max_order must be a non-negative integer")
        if self.walls is not None:
            walls = tuple(float(w) for w in self.walls)
            if len(walls) != 6 or not all(0.0 <= w <= 1.0 for w in walls):
                raise ValidationError("walls needs six coefficients in [0, 1]")
            object.__setattr__(self, "walls", walls)
        if self.filter_taps < 1 or self.filter_taps % 2 == 0:
            raise ValidationError("filter_taps must be a positive odd number")

    @property
    def n_mics(self) -> int:
        return self.mics.shape[0]

    def wall_coefficients(self) -> np.ndarray:
        """Coefficients ordered ``(x0, x1, y0, y1, z0, z1)``."""
        if self.walls is not None:
            return np.array(self.walls)
        return np.repeat(self.room.reflection, 2)

    def effective_room(self) -> RoomSpec:
        """Room with each wall pair collapsed to the geometric mean of its two walls."""
        w = self.wall_coefficients()
        r = [combine_wall_coefficients(w[2 * i], w[2 * i + 1]) for i in range(3)]
        room = self.room
        return RoomSpec(room.lx, room.ly, room.lz, *r, c=room.c)

    def max_distance(self) -> float:
        """Longest path that can still reach the response window."""
        return self.room.c * (self.length + self.filter_taps // 2) / self.fs

    def to_dict(self) -> dict:
        return {
            "room": self.room.to_dict(),
            "source": self.source.tolist(),
            "mics": self.mics.tolist(),
            "fs": self.fs,
            "length": self.length,
            "max_order": self.max_order,
            "fractional": self.fractional,
            "walls": list(self.walls) if self.walls is not None else None,
            "max_images": self.max_images,
            "filter_taps": self.filter_taps,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        data = dict(data)
        data["room"] = RoomSpec(**data["room"])
        if data.get("walls") is not None:
            data["walls"] = tuple(data["walls"])
        return cls(**data)


class ImageSources(NamedTuple):
    positions: np.ndarray  # (N, 3) meters
    gains: np.ndarray      # (N,) product of wall coefficients, no spreading
    orders: np.ndarray     # (N,) total reflection count


@dataclass(frozen=True)
class ImpulseResponseSet:
    """Multichannel impulse responses, shape ``(channels, samples)``."""

    data: np.ndarray
    fs: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2 or data.shape[1] == 0:
            raise ValidationError("impulse responses must be a (channels, samples) array")
        if not np.all(np.isfinite(data)):
            raise ValidationError("impulse responses contain non-finite samples")
        if not (math.isfinite(self.fs) and self.fs > 0):
            raise ValidationError("sample rate must be > 0")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "fs", float(self.fs))

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def mic_positions(self) -> Optional[np.ndarray]:
        mics = self.metadata.get("mics")
        return None if mics is None else np.asarray(mics, dtype=float)


def _axis_images(source, length, coeff_lo, coeff_hi, m_max):
    """Image coordinates along one axis with their wall hit counts."""
    m = np.arange(-m_max, m_max + 1)
    q = np.array([0, 1])
    m, q = np.meshgrid(m, q, indexing="ij")
    m, q = m.ravel(), q.ravel()
    coord = (1 - 2 * q) * source + 2 * m * length
    hits_lo = np.abs(m - q)
    hits_hi = np.abs(m)
    gain = coeff_lo ** hits_lo * coeff_hi ** hits_hi
    return coord, gain, hits_lo + hits_hi


def enumerate_images(cfg: SimConfig) -> ImageSources:
    """All image sources that can reach a microphone within the response window.

    The true source is always included (order 0).  Images beyond
    ``cfg.max_order`` reflections, or too far from every microphone to arrive
    before the end of the response, are skipped.

    Raises:
        ImageBudgetError: more than ``cfg.max_images`` images remain.
    """
    dims = cfg.room.dimensions
    walls = cfg.wall_coefficients()
    reach = cfg.max_distance()
    per_axis = []
    for i in range(3):
        m_max = int(math.ceil(reach / (2.0 * dims[i]))) + 1
        if cfg.max_order is not None:
            m_max = min(m_max, cfg.max_order // 2 + 1)
        per_axis.append(_axis_images(cfg.source[i], dims[i], walls[2 * i],
                                     walls[2 * i + 1], m_max))
    lattice = math.prod(a[0].size for a in per_axis)
    if lattice > _LATTICE_BUDGET:
        raise ImageBudgetError(
            f"image lattice of {lattice} points exceeds {_LATTICE_BUDGET}",
            count=lattice, budget=_LATTICE_BUDGET)

    ix, iy, iz = np.meshgrid(*[np.arange(a[0].size) for a in per_axis], indexing="ij")
    ix, iy, iz = ix.ravel(), iy.ravel(), iz.ravel()
    positions = np.stack([per_axis[0][0][ix], per_axis[1][0][iy], per_axis[2][0][iz]], axis=1)
    orders = per_axis[0][2][ix] + per_axis[1][2][iy] + per_axis[2][2][iz]
    keep = np.ones(orders.size, dtype=bool)
    if cfg.max_order is not None:
        keep &= orders <= cfg.max_order
    nearest = np.full(orders.size, np.inf)
    for mic in cfg.mics:
        nearest = np.minimum(nearest, np.linalg.norm(positions - mic, axis=1))
    keep &= nearest <= reach
    count = int(keep.sum())
    if count > cfg.max_images:
        raise ImageBudgetError(
            f"{count} image sources exceed the budget of {cfg.max_images}",
            count=count, budget=cfg.max_images)
    gains = per_axis[0][1][ix] * per_axis[1][1][iy] * per_axis[2][1][iz]
    return ImageSources(positions[keep], gains[keep], orders[keep])


def _render_channel(images: ImageSources, mic, cfg: SimConfig) -> np.ndarray:
    dist = np.linalg.norm(images.positions - mic, axis=1)
    delay = dist / cfg.room.c * cfg.fs
    amp = images.gains / (4.0 * math.pi * dist)
    if not cfg.fractional:
        index = np.rint(delay).astype(np.int64)
        ok = index < cfg.length
        return np.bincount(index[ok], weights=amp[ok], minlength=cfg.length)

    half = cfg.filter_taps // 2
    centre = np.rint(delay).astype(np.int64)
    ok = (centre - half) < cfg.length
    centre, delay, amp = centre[ok], delay[ok], amp[ok]
    offsets = np.arange(-half, half + 1)
    index = centre[:, None] + offsets
    x = index - delay[:, None]
    # Hann window spanning the filter length, zero at +-filter_taps/2
    window = 0.5 * (1.0 + np.cos(2.0 * math.pi * x / cfg.filter_taps))
    taps = amp[:, None] * window * np.sinc(x)
    valid = (index >= 0) & (index < cfg.length)
    return np.bincount(index[valid], weights=taps[valid], minlength=cfg.length)


def synthesize_rir(cfg: SimConfig) -> ImpulseResponseSet:
    """Render one impulse response per microphone.

    Raises:
        ImageBudgetError: the image count exceeds ``cfg.max_images``.
    """
    images = enumerate_images(cfg)
    data = np.stack([_render_channel(images, mic, cfg) for mic in cfg.mics])
    return ImpulseResponseSet(data, cfg.fs, metadata=cfg.to_dict())


def energy_decay_curve(h) -> np.ndarray:
    """Schroeder backward integral of the squared response."""
    h = np.asarray(h, dtype=float)
    return np.cumsum((h * h)[..., ::-1], axis=-1)[..., ::-1]


def linear_array(center: Sequence[float], n_mics: int, spacing: float,
                 theta: float = 0.0, phi: float = 0.0) -> np.ndarray:
    """Uniform linear array centred on ``center`` along direction ``(theta, phi)``."""
    if n_mics < 1:
        raise ValidationError("n_mics must be >= 1")
    axis = unit_vector(theta, phi)
    offsets = (np.arange(n_mics) - 0.5 * (n_mics - 1)) * spacing
    return np.asarray(center, dtype=float) + offsets[:, None] * axis
