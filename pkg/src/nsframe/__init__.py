"""Nonstationary Gabor frames: window systems, frame-bound certificates and a discrete transform."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .certify import (
    ExistenceSearchParams,
    FrameCertificate,
    almost_painless_certificate,
    existence_certificate,
    existence_search,
    existence_search_frequency_side,
    painless_certificate,
    perturbation_certificate,
    walnut_certificate,
)
from .estimates import (
    overlap_constants,
    separated_sum_bound,
    tail_sum_bound,
    wiener_norm,
)
from .nsgt import (
    CoefficientSet,
    DiscreteSystem,
    analyze,
    discretize,
    dual_system,
    frame_bounds_bruteforce,
    synthesize,
)
from .walnut import compute_G0, frame_bounds_walnut, residual_R
from .windows import (
    DecayProfile,
    NsgSystem,
    ScaleSequence,
    WindowSpec,
    bandlimit_system,
    build_periodic_system,
    build_scale_system,
    derive_tail_profile,
    truncate_system,
)

__all__ = [
    "BACKEND",
    "CoefficientSet",
    "DecayProfile",
    "DiscreteSystem",
    "ExistenceSearchParams",
    "FrameCertificate",
    "NsgSystem",
    "ScaleSequence",
    "WindowSpec",
    "almost_painless_certificate",
    "analyze",
    "bandlimit_system",
    "build_periodic_system",
    "build_scale_system",
    "compute_G0",
    "derive_tail_profile",
    "discretize",
    "dual_system",
    "existence_certificate",
    "existence_search",
    "existence_search_frequency_side",
    "frame_bounds_bruteforce",
    "frame_bounds_walnut",
    "overlap_constants",
    "painless_certificate",
    "perturbation_certificate",
    "residual_R",
    "separated_sum_bound",
    "synthesize",
    "tail_sum_bound",
    "truncate_system",
    "walnut_certificate",
    "wiener_norm",
]
