"""Domain value types and unit conventions.

Angles follow one convention everywhere: the polar angle ``theta`` is
measured from the x axis and the azimuth ``phi`` rotates about x, so a unit
vector reads ``(cos theta, sin theta cos phi, sin theta sin phi)``.
Reflection coefficients are amplitude coefficients; a bounce scales power by
``R**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ValidationError

SPEED_OF_SOUND = 343.0
TWO_PI = 2.0 * math.pi


def _require_finite(**values):
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValidationError(f"{name} must be finite, got {value!r}")


def _normalize_azimuth(phi: float) -> float:
    phi = math.fmod(phi, TWO_PI)
    if phi < 0.0:
        phi += TWO_PI
    # fmod of values just below a multiple of 2*pi can round up to 2*pi
    return 0.0 if phi >= TWO_PI else phi


def unit_vector(theta, phi):
    """Cartesian unit vector(s) for direction angle(s) in the package convention."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    s = np.sin(theta)
    return np.stack([np.cos(theta), s * np.cos(phi), s * np.sin(phi)], axis=-1)


@dataclass(frozen=True)
class RoomSpec:
    """Rectangular room with one amplitude reflection coefficient per axis.

    Args:
        lx, ly, lz: room dimensions in meters.
        rx, ry, rz: reflection coefficients of the wall pairs normal to x, y, z.
        c: speed of sound in m/s.
    """

    lx: float
    ly: float
    lz: float
    rx: float = 1.0
    ry: float = 1.0
    rz: float = 1.0
    c: float = SPEED_OF_SOUND

    def __post_init__(self):
        for name in ("lx", "ly", "lz", "rx", "ry", "rz", "c"):
            object.__setattr__(self, name, float(getattr(self, name)))
        validate_room(self)

    @property
    def dimensions(self) -> np.ndarray:
        return np.array([self.lx, self.ly, self.lz])

    @property
    def reflection(self) -> np.ndarray:
        return np.array([self.rx, self.ry, self.rz])

    def to_dict(self) -> dict:
        return {"lx": self.lx, "ly": self.ly, "lz": self.lz,
                "rx": self.rx, "ry": self.ry, "rz": self.rz, "c": self.c}


def validate_room(spec: RoomSpec) -> RoomSpec:
    """Check the room invariants and return ``spec`` unchanged.

    Raises:
        ValidationError: non-finite field, non-positive dimension or speed of
            sound, or a reflection coefficient outside ``[0, 1]``.
    """
    _require_finite(lx=spec.lx, ly=spec.ly, lz=spec.lz,
                    rx=spec.rx, ry=spec.ry, rz=spec.rz, c=spec.c)
    for name in ("lx", "ly", "lz"):
        if getattr(spec, name) <= 0.0:
            raise ValidationError(f"room dimension {name} must be > 0")
    for name in ("rx", "ry", "rz"):
        value = getattr(spec, name)
        if not 0.0 <= value <= 1.0:
            raise ValidationError(
                f"reflection coefficient {name}={value} outside [0, 1]")
    if spec.c <= 0.0:
        raise ValidationError("speed of sound must be > 0")
    return spec


@dataclass(frozen=True)
class Direction:
    """Propagation direction; ``phi`` is wrapped into ``[0, 2*pi)``."""

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        theta, phi = float(self.theta), float(self.phi)
        _require_finite(theta=theta, phi=phi)
        if not 0.0 <= theta <= math.pi:
            raise ValidationError(f"theta={theta} outside [0, pi]")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", _normalize_azimuth(phi))

    def vector(self) -> np.ndarray:
        return unit_vector(self.theta, self.phi)


@dataclass(frozen=True)
class MicPairSpec:
    """Sensor pair with spacing ``d`` (m) and axis orientation (radians)."""

    d: float
    theta_mic: float = 0.0
    phi_mic: float = 0.0

    def __post_init__(self):
        d, theta, phi = float(self.d), float(self.theta_mic), float(self.phi_mic)
        _require_finite(d=d, theta_mic=theta, phi_mic=phi)
        if d < 0.0:
            raise ValidationError("sensor spacing d must be >= 0")
        if not 0.0 <= theta <= math.pi:
            raise ValidationError(f"theta_mic={theta} outside [0, pi]")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "theta_mic", theta)
        object.__setattr__(self, "phi_mic", _normalize_azimuth(phi))

    @classmethod
    def from_degrees(cls, d, theta_mic_deg=0.0, phi_mic_deg=0.0) -> "MicPairSpec":
        return cls(d, math.radians(theta_mic_deg), math.radians(phi_mic_deg))

    def axis(self) -> np.ndarray:
        return unit_vector(self.theta_mic, self.phi_mic)


@dataclass(frozen=True)
class WavenumberGrid:
    """Strictly increasing, non-negative wavenumbers in rad/m."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size == 0:
            raise ValidationError("wavenumber grid is empty")
        if not np.all(np.isfinite(values)):
            raise ValidationError("wavenumber grid has non-finite values")
        if values[0] < 0.0:
            raise ValidationError("wavenumbers must be >= 0")
        if np.any(np.diff(values) <= 0.0):
            raise ValidationError("wavenumber grid must be strictly increasing")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_frequencies(cls, freqs, c: float = SPEED_OF_SOUND) -> "WavenumberGrid":
        return cls(wavenumber_from_frequency(np.asarray(freqs, dtype=float), c))

    def frequencies(self, c: float = SPEED_OF_SOUND) -> np.ndarray:
        return frequency_from_wavenumber(self.values, c)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class CoherenceCurve:
    """Complex coherence sampled on a wavenumber grid.

    ``t`` is the evaluation time in seconds, ``None`` for stationary models.
    """

    grid: WavenumberGrid
    values: np.ndarray
    t: Optional[float] = None
    tolerance: float = field(default=1e-9, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=complex).reshape(-1)
        if values.size != len(self.grid):
            raise ValidationError("coherence values do not match the grid size")
        if np.any(np.abs(values) > 1.0 + self.tolerance):
            raise ValidationError("coherence magnitude exceeds 1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def wavenumber_from_frequency(f, c: float = SPEED_OF_SOUND):
    """Return ``2*pi*f/c`` in rad/m. Accepts scalars or arrays."""
    f_arr = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f_arr)) or not math.isfinite(c):
        raise ValidationError("frequency and speed of sound must be finite")
    if c <= 0.0:
        raise ValidationError("speed of sound must be > 0")
    if np.any(f_arr < 0.0):
        raise ValidationError("frequency must be >= 0")
    k = TWO_PI * f_arr / c
    return float(k) if np.ndim(f) == 0 else k


def frequency_from_wavenumber(k, c: float = SPEED_OF_SOUND):
    """Inverse of :func:`wavenumber_from_frequency`."""
    k_arr = np.asarray(k, dtype=float)
    if not np.all(np.isfinite(k_arr)) or not math.isfinite(c):
        raise ValidationError("wavenumber and speed of sound must be finite")
    if c <= 0.0:
        raise ValidationError("speed of sound must be > 0")
    f = k_arr * c / TWO_PI
    return float(f) if np.ndim(k) == 0 else f
