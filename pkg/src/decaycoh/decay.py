"""Time-varying coherence of a decaying reverberant field in a rectangular room.

Every ray direction carries the same initial power.  After ``t`` seconds a
ray has met the walls normal to axis ``i`` about ``t*c*|u_i|/L_i`` times and
its power has been scaled by ``R_i**(2*t*c*|u_i|/L_i)``.  The coherence is the
attenuation-weighted average of the inter-sensor phase term over the sphere.

The sphere integrals are evaluated with globally adaptive tensor
Gauss-Legendre panels.  The initial panels are the eight octants, because
``|cos theta|``, ``|cos phi|`` and ``|sin phi|`` have derivative kinks on
their boundaries.  A Monte-Carlo estimator of the same quotient is provided
as an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .core import (
    CoherenceCurve,
    Direction,
    MicPairSpec,
    RoomSpec,
    WavenumberGrid,
    unit_vector,
)
from .errors import DegenerateFieldError, QuadratureError, ValidationError

_DENOMINATOR_FLOOR = 1e-300
# complex entries per chunk when evaluating panels for many wavenumbers
_CHUNK_ENTRIES = 1 << 21
# decay rate (per radian) above which the initial panels are graded
_GRADE_ABOVE = 16.0
_MAX_GRADE_LEVELS = 48


@dataclass(frozen=True)
class RayAttenuationParams:
    room: RoomSpec
    t: float

    def __post_init__(self):
        t = float(self.t)
        if not math.isfinite(t) or t < 0.0:
            raise ValidationError("t must be finite and >= 0")
        object.__setattr__(self, "t", t)


@dataclass(frozen=True)
class QuadratureConfig:
    """Settings for the adaptive sphere quadrature.

    Args:
        tol: absolute error bound on the coherence quotient.
        order: Gauss-Legendre nodes per panel edge.
        max_panels: panel budget before giving up.
        split_domain: start from the eight octants instead of one panel.
    """

    tol: float = 1e-8
    order: int = 12
    max_panels: int = 20000
    split_domain: bool = True

    def __post_init__(self):
        if not (self.tol > 0.0):
            raise ValidationError("quadrature tolerance must be > 0")
        if self.order < 2:
            raise ValidationError("quadrature order must be >= 2")
        if self.max_panels < 1:
            raise ValidationError("max_panels must be >= 1")


def velocity_components(direction: Direction, c: float):
    """Split the speed ``c`` along the room axes for a ray travelling in ``direction``."""
    s = math.sin(direction.theta)
    return (c * math.cos(direction.theta),
            c * s * math.cos(direction.phi),
            c * s * math.sin(direction.phi))


def ray_attenuation(direction: Direction, params: RayAttenuationParams) -> float:
    """Power factor of a ray after ``params.t`` seconds of wall collisions.

    A zero reflection coefficient with a zero exponent contributes 1, with a
    positive exponent it zeroes the ray.
    """
    room = params.room
    velocity = velocity_components(direction, room.c)
    log_power = 0.0
    for v, length, r in zip(velocity, room.dimensions, room.reflection):
        exponent = 2.0 * params.t * abs(v) / length
        if exponent == 0.0 or r == 1.0:
            continue
        if r == 0.0:
            return 0.0
        log_power += exponent * math.log(r)
    return math.exp(log_power)


def phase_term(direction: Direction, k: float, mic: MicPairSpec) -> complex:
    """Inter-sensor phase factor for a plane wave travelling along ``direction``."""
    projection = (math.cos(mic.theta_mic) * math.cos(direction.theta)
                  + math.sin(mic.theta_mic) * math.sin(direction.theta)
                  * math.cos(mic.phi_mic - direction.phi))
    arg = -k * mic.d * projection
    return complex(math.cos(arg), math.sin(arg))


def combine_wall_coefficients(r1: float, r2: float) -> float:
    """Single coefficient for two parallel walls: their geometric mean."""
    for r in (r1, r2):
        if not (0.0 <= r <= 1.0):
            raise ValidationError(f"reflection coefficient {r} outside [0, 1]")
    return math.sqrt(r1 * r2)


def _decay_rates(room: RoomSpec) -> np.ndarray:
    """Per-axis ``-ln(R)/L``; ``inf`` marks a fully absorbing wall pair."""
    with np.errstate(divide="ignore"):
        return -np.log(room.reflection) / room.dimensions


@lru_cache(maxsize=16)
def _gauss_legendre(order):
    return np.polynomial.legendre.leggauss(order)


def _tensor_rule(boxes, order):
    """Tensor Gauss-Legendre nodes and weights for each box.

    ``boxes`` has shape ``(P, D, 2)``; returns points ``(P, N, D)`` and
    weights ``(P, N)`` with ``N = order**D``.
    """
    x, w = _gauss_legendre(order)
    mid = 0.5 * (boxes[..., 0] + boxes[..., 1])
    half = 0.5 * (boxes[..., 1] - boxes[..., 0])
    n_boxes, dims = mid.shape
    nodes = mid[:, :, None] + half[:, :, None] * x          # (P, D, n)
    weights = half[:, :, None] * w                          # (P, D, n)
    grids = np.meshgrid(*([np.arange(order)] * dims), indexing="ij")
    index = [g.reshape(-1) for g in grids]
    points = np.stack([nodes[:, i, index[i]] for i in range(dims)], axis=-1)
    total = np.ones((n_boxes, index[0].size))
    for i in range(dims):
        total = total * weights[:, i, index[i]]
    return points, total


def _kink_edges(stop, sharpness, split):
    """Panel edges on ``[0, stop]`` at multiples of pi/2, graded toward each kink.

    Attenuation peaks sit on the kink lines with width about ``1/sharpness``.
    Without grading a very narrow peak can fall between all Gauss nodes of
    the first panels and go unnoticed by the error estimate.
    """
    if not split:
        return np.array([0.0, stop])
    quarter = 0.5 * math.pi
    kinks = np.linspace(0.0, stop, int(round(stop / quarter)) + 1)
    levels = 0
    if sharpness > _GRADE_ABOVE:
        levels = min(_MAX_GRADE_LEVELS,
                     int(math.ceil(math.log2(sharpness / _GRADE_ABOVE))))
    offsets = 0.5 * quarter * 0.5 ** np.arange(1, levels + 1)
    edges = [kinks]
    for a, b in zip(kinks[:-1], kinks[1:]):
        edges.append(a + offsets)
        edges.append(b - offsets)
    return np.unique(np.concatenate(edges))


def _boxes_from_edges(*edges):
    grids = np.meshgrid(*[np.arange(e.size - 1) for e in edges], indexing="ij")
    cells = [g.ravel() for g in grids]
    return np.stack([np.stack([e[c], e[c + 1]], axis=-1)
                     for e, c in zip(edges, cells)], axis=1)


class _SphereIntegrand:
    """Attenuation-weighted phase integrand in ``(theta, phi)``."""

    dims = 2

    def __init__(self, rates, t, c, axis):
        self.scale = 2.0 * t * c * rates
        self.shift = float(np.min(self.scale))  # max attenuation is 1 after the shift
        self.axis = axis

    def initial_boxes(self, split):
        sharpness = float(np.max(self.scale))
        return _boxes_from_edges(_kink_edges(math.pi, sharpness, split),
                                 _kink_edges(2.0 * math.pi, sharpness, split))

    def __call__(self, points):
        theta, phi = points[..., 0], points[..., 1]
        u = unit_vector(theta, phi)
        log_a = -(np.abs(u) @ self.scale) + self.shift
        density = np.sin(theta) * np.exp(log_a)
        return density, u @ self.axis


class _CircleIntegrand:
    """Limit of the sphere integrand when one wall pair absorbs everything.

    Rays with any velocity component along the absorbing axis vanish, and the
    surviving weight concentrates uniformly (in angle) on the great circle
    perpendicular to that axis.
    """

    dims = 1

    def __init__(self, zero_axis, rates, t, c, axis):
        self.plane = [i for i in range(3) if i != zero_axis]
        scale = 2.0 * t * c * rates[self.plane]
        self.scale = scale
        self.shift = float(np.min(scale))
        self.axis = axis[self.plane]

    def initial_boxes(self, split):
        return _boxes_from_edges(_kink_edges(2.0 * math.pi, float(np.max(self.scale)), split))

    def __call__(self, points):
        psi = points[..., 0]
        u = np.stack([np.cos(psi), np.sin(psi)], axis=-1)
        density = np.exp(-(np.abs(u) @ self.scale) + self.shift)
        return density, u @ self.axis


def _integrate_boxes(integrand, boxes, kd, order):
    """Numerator (one per ``kd``) and denominator integrals per box.

    Returns ``(P, K + 1)`` complex; the last column is the denominator.
    """
    points, weights = _tensor_rule(boxes, order)
    density, projection = integrand(points)
    wd = weights * density
    # the denominator is the kd = 0 row, so it is reduced exactly like a numerator
    kd_all = np.append(kd, 0.0)
    out = np.empty((boxes.shape[0], kd_all.size), dtype=complex)
    n_nodes = wd.shape[1]
    step = max(1, _CHUNK_ENTRIES // (kd_all.size * n_nodes))
    for start in range(0, boxes.shape[0], step):
        sl = slice(start, start + step)
        arg = kd_all[None, :, None] * projection[sl, None, :]
        w = wd[sl, None, :]
        out[sl] = (w * np.cos(arg)).sum(-1) - 1j * (w * np.sin(arg)).sum(-1)
    return out


def _halves(boxes, dim):
    lo = boxes.copy()
    hi = boxes.copy()
    mid = 0.5 * (boxes[:, dim, 0] + boxes[:, dim, 1])
    lo[:, dim, 1] = mid
    hi[:, dim, 0] = mid
    return lo, hi


def _assess(integrand, boxes, kd, order):
    """Refined value, error estimate and preferred split axis per box."""
    coarse = _integrate_boxes(integrand, boxes, kd, order)
    best_value = None
    best_err = np.full(boxes.shape[0], -1.0)
    split_dim = np.zeros(boxes.shape[0], dtype=int)
    for dim in range(boxes.shape[1]):
        lo, hi = _halves(boxes, dim)
        fine = (_integrate_boxes(integrand, lo, kd, order)
                + _integrate_boxes(integrand, hi, kd, order))
        diff = np.abs(fine - coarse)
        err = diff[:, :-1].max(axis=1, initial=0.0) + diff[:, -1]
        better = err > best_err
        if best_value is None:
            best_value = fine
        else:
            best_value = np.where(better[:, None], fine, best_value)
        split_dim = np.where(better, dim, split_dim)
        best_err = np.maximum(best_err, err)
    return best_value, best_err, split_dim


def _adaptive_quotient(integrand, kd, q: QuadratureConfig):
    boxes = integrand.initial_boxes(q.split_domain)
    values, errors, dims = _assess(integrand, boxes, kd, q.order)
    while True:
        total = values.sum(axis=0)
        denominator = total[-1].real
        if not denominator > _DENOMINATOR_FLOOR:
            raise DegenerateFieldError(
                "ray power integral underflowed; the field is fully absorbed")
        total_error = errors.sum()
        allowed = q.tol * denominator
        if total_error <= allowed:
            # divide parts separately; complex division does not return x/x == 1
            return total[:-1].real / denominator + 1j * (total[:-1].imag / denominator)
        if boxes.shape[0] >= q.max_panels:
            raise QuadratureError(
                f"quadrature did not converge within {q.max_panels} panels "
                f"(error estimate {total_error / denominator:.3g}, "
                f"target {q.tol:.3g})",
                achieved=total_error / denominator, target=q.tol)
        order = np.argsort(errors)[::-1]
        cumulative = np.cumsum(errors[order])
        n_split = int(np.searchsorted(cumulative, 0.5 * total_error)) + 1
        n_split = min(n_split, q.max_panels - boxes.shape[0])
        n_split = max(n_split, 1)
        chosen = order[:n_split]
        keep = np.ones(boxes.shape[0], dtype=bool)
        keep[chosen] = False
        children = []
        for dim in range(boxes.shape[1]):
            picked = boxes[chosen[dims[chosen] == dim]]
            if picked.size:
                children.extend(_halves(picked, dim))
        children = np.concatenate(children)
        new_values, new_errors, new_dims = _assess(integrand, children, kd, q.order)
        boxes = np.concatenate([boxes[keep], children])
        values = np.concatenate([values[keep], new_values])
        errors = np.concatenate([errors[keep], new_errors])
        dims = np.concatenate([dims[keep], new_dims])


def _check_inputs(k, t, mic):
    k_arr = np.asarray(k, dtype=float).reshape(-1)
    if not np.all(np.isfinite(k_arr)) or np.any(k_arr < 0.0):
        raise ValidationError("wavenumbers must be finite and >= 0")
    t = float(t)
    if not math.isfinite(t) or t < 0.0:
        raise ValidationError("t must be finite and >= 0")
    return k_arr * mic.d, t


def _coherence_values(k, t, room: RoomSpec, mic: MicPairSpec,
                      q: Optional[QuadratureConfig] = None) -> np.ndarray:
    q = q or QuadratureConfig()
    kd, t = _check_inputs(k, t, mic)
    axis = mic.axis()
    if t == 0.0:
        rates = np.zeros(3)
    else:
        rates = _decay_rates(room)
    absorbing = np.flatnonzero(np.isinf(rates))
    if absorbing.size == 3:
        raise DegenerateFieldError("all wall pairs absorb fully; no ray survives t > 0")
    if absorbing.size == 2:
        # only rays along the remaining axis survive; the two opposite rays
        # carry equal power
        survivor = int(np.setdiff1d(np.arange(3), absorbing)[0])
        return np.cos(kd * axis[survivor]).astype(complex)
    if absorbing.size == 1:
        integrand = _CircleIntegrand(int(absorbing[0]), rates, t, room.c, axis)
    else:
        integrand = _SphereIntegrand(rates, t, room.c, axis)
    return _adaptive_quotient(integrand, kd, q)


def decaying_coherence(k: float, t: float, room: RoomSpec, mic: MicPairSpec,
                       q: Optional[QuadratureConfig] = None) -> complex:
    """Coherence of the decaying field at wavenumber ``k`` and time ``t``.

    Raises:
        QuadratureError: the panel budget ran out before reaching ``q.tol``.
        DegenerateFieldError: no ray power survives at time ``t``.
    """
    return complex(_coherence_values([k], t, room, mic, q)[0])


def decaying_coherence_curve(grid: WavenumberGrid, t: float, room: RoomSpec,
                             mic: MicPairSpec,
                             q: Optional[QuadratureConfig] = None) -> CoherenceCurve:
    """Evaluate the decaying-field coherence on every point of ``grid``.

    All wavenumbers share one adaptive panel set.  If that joint run fails,
    points are retried one at a time so the error names the offending index.
    """
    try:
        values = _coherence_values(grid.values, t, room, mic, q)
    except QuadratureError:
        values = np.empty(len(grid), dtype=complex)
        for index, k in enumerate(grid.values):
            try:
                values[index] = _coherence_values([k], t, room, mic, q)[0]
            except QuadratureError as exc:
                raise QuadratureError(f"grid index {index} (k={k:g}): {exc}",
                                      achieved=exc.achieved, target=exc.target) from exc
    return CoherenceCurve(grid, values, t=float(t))


def _mc_chunk(rng, size, scale, shift, kd, axis):
    cos_theta = rng.uniform(-1.0, 1.0, size)
    phi = rng.uniform(0.0, 2.0 * math.pi, size)
    sin_theta = np.sqrt(1.0 - cos_theta * cos_theta)
    u = np.stack([cos_theta, sin_theta * np.cos(phi), sin_theta * np.sin(phi)], axis=-1)
    # a zero exponent contributes nothing even on a fully absorbing axis
    au = np.abs(u)
    with np.errstate(invalid="ignore"):
        log_a = -np.where(au > 0.0, au * scale, 0.0).sum(axis=-1) + shift
    w = np.exp(log_a)
    arg = kd * (u @ axis)
    return w, w * np.cos(arg) - 1j * (w * np.sin(arg))


def mc_coherence(k: float, t: float, room: RoomSpec, mic: MicPairSpec,
                 n_samples: int, seed: int, chunk_size: int = 1 << 16):
    """Monte-Carlo estimate of the decaying-field coherence.

    Directions are drawn uniformly on the sphere.  The sample budget is cut
    into fixed-size chunks, each with its own child seed, so the estimate is
    independent of how chunks are scheduled.

    Returns:
        ``(estimate, stderr)`` where ``stderr`` is the delta-method standard
        error of the ratio estimator (modulus of the complex residual).
    """
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    kd, t = _check_inputs([k], t, mic)
    kd = float(kd[0])
    rates = np.zeros(3) if t == 0.0 else _decay_rates(room)
    scale = 2.0 * t * room.c * rates
    finite = scale[np.isfinite(scale)]
    shift = float(np.min(finite)) if finite.size else 0.0
    axis = mic.axis()

    sizes = [chunk_size] * (n_samples // chunk_size)
    if n_samples % chunk_size:
        sizes.append(n_samples % chunk_size)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    sum_w = 0.0
    sum_y = 0.0j
    for child, size in zip(seeds, sizes):
        w, y = _mc_chunk(np.random.default_rng(child), size, scale, shift, kd, axis)
        sum_w += w.sum()
        sum_y += y.sum()
    if not sum_w > _DENOMINATOR_FLOOR:
        raise DegenerateFieldError("no sampled ray carries power")
    estimate = complex(sum_y.real / sum_w, sum_y.imag / sum_w)

    # second pass over the same streams for the residual variance
    sum_r2 = 0.0
    for child, size in zip(seeds, sizes):
        w, y = _mc_chunk(np.random.default_rng(child), size, scale, shift, kd, axis)
        r = y - estimate * w
        sum_r2 += float(np.sum(r.real * r.real + r.imag * r.imag))
    mean_w = sum_w / n_samples
    if n_samples > 1:
        stderr = math.sqrt(sum_r2 / (n_samples * (n_samples - 1))) / mean_w
    else:
        stderr = math.inf
    return complex(estimate), stderr
