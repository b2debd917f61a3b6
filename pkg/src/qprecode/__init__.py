"""Quantized linear precoding for the massive MIMO downlink.

Simulation, asymptotic analysis, and optimization of transmit systems of the
form x = eta * q(P s): a spectral-shaping linear precoder P followed by a
per-antenna quantizer q.  See the README for the CLI and typical workflows.
"""

from .asymptotics import (
    AsymptoticReport,
    MPDistribution,
    QCEClosedForms,
    ShapingFunction,
    asymptotic_sep,
    asymptotic_sinr,
    custom_shaping,
    matched_filter,
    mp_expect,
    optimal_scaled,
    qce_closed_forms,
    qfunc,
    regularized_zf,
    saturating_eta,
    zero_forcing,
)
from .optimizer import (
    AuditReport,
    AuditRow,
    DegenerateQuantizerError,
    OptimalDesign,
    optimal_design,
    optimality_audit,
    optimize_alpha,
)
from .quantizers import (
    Quantizer,
    QuantizerMoments,
    ZeroBussgangGainError,
    constant_envelope,
    identity,
    independent,
    moments,
    moments_gh_tensor,
    moments_quadrature,
    parse_quantizer,
    phi,
    quantize,
)
from .randmat import (
    ChannelDecomposition,
    HouseholderReflector,
    complex_normal,
    haar_recursion_check,
    reflector,
    sample_channel,
    thin_svd,
)
from .simulator import (
    EquivalenceReport,
    EquivalentDraw,
    MonteCarloReport,
    TransmissionDraw,
    build_precoder,
    equivalence_test,
    ks_critical,
    ks_two_sample,
    sample_equivalent,
    simulate_ser,
    transmit_once,
    wilson_interval,
)
from .sysmodel import (
    Constellation,
    SystemConfig,
    decode,
    make_constellation,
    sep_decision_regions,
)

__version__ = "0.1.0"

__all__ = [
    "AsymptoticReport",
    "AuditReport",
    "AuditRow",
    "ChannelDecomposition",
    "Constellation",
    "DegenerateQuantizerError",
    "EquivalenceReport",
    "EquivalentDraw",
    "HouseholderReflector",
    "MPDistribution",
    "MonteCarloReport",
    "OptimalDesign",
    "QCEClosedForms",
    "Quantizer",
    "QuantizerMoments",
    "ShapingFunction",
    "SystemConfig",
    "TransmissionDraw",
    "ZeroBussgangGainError",
    "asymptotic_sep",
    "asymptotic_sinr",
    "build_precoder",
    "complex_normal",
    "constant_envelope",
    "custom_shaping",
    "decode",
    "equivalence_test",
    "haar_recursion_check",
    "identity",
    "independent",
    "ks_critical",
    "ks_two_sample",
    "make_constellation",
    "matched_filter",
    "moments",
    "moments_gh_tensor",
    "moments_quadrature",
    "mp_expect",
    "optimal_design",
    "optimal_scaled",
    "optimality_audit",
    "optimize_alpha",
    "parse_quantizer",
    "phi",
    "qce_closed_forms",
    "qfunc",
    "quantize",
    "reflector",
    "regularized_zf",
    "sample_channel",
    "sample_equivalent",
    "saturating_eta",
    "sep_decision_regions",
    "simulate_ser",
    "thin_svd",
    "transmit_once",
    "wilson_interval",
    "zero_forcing",
]
