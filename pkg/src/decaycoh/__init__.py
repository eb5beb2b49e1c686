"""Spatial coherence of decaying reverberant sound fields in rectangular rooms."""

from .core import (
    CoherenceCurve,
    Direction,
    MicPairSpec,
    RoomSpec,
    WavenumberGrid,
    frequency_from_wavenumber,
    validate_room,
    wavenumber_from_frequency,
)
from .decay import (
    QuadratureConfig,
    RayAttenuationParams,
    combine_wall_coefficients,
    decaying_coherence,
    decaying_coherence_curve,
    mc_coherence,
    phase_term,
    ray_attenuation,
    velocity_components,
)
from .errors import (
    DecayCohError,
    DegenerateFieldError,
    ImageBudgetError,
    NumericalError,
    QuadratureError,
    ValidationError,
)
from .estimator import (
    EstimationConfig,
    IntervalCoherence,
    estimate_all,
    estimate_interval_coherence,
    segment_intervals,
    stft_frames,
)
from .isotropic import bessel_j0, cylindrical_coherence, sinc_unnormalized, spherical_coherence
from .rirsim import (
    ImpulseResponseSet,
    SimConfig,
    enumerate_images,
    linear_array,
    synthesize_rir,
)

__version__ = "0.1.0"
