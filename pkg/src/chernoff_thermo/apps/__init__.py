"""Application calculators built on the weighted-model entropy."""

from .channel import ChannelProblem, ChannelResult, channel_exponent, mutual_information
from .detection import (
    DetectionResult,
    TempTestProblem,
    TempTestResult,
    detection_exponents,
    heat_capacity_integral,
    temperature_test_exponents,
)
from .quantizer import (
    PhaseScan,
    Quantizer,
    QuantizerPlan,
    QuantizerProblem,
    phase_transition_scan,
    quantizer_exponent,
    quantizer_from_map,
)
from .rd import (
    HighResProblem,
    RdProblem,
    RdResult,
    binary_hamming_rd,
    highres_distortion,
    highres_rate,
    rate_distortion,
)

__all__ = [
    "ChannelProblem",
    "ChannelResult",
    "DetectionResult",
    "HighResProblem",
    "PhaseScan",
    "Quantizer",
    "QuantizerPlan",
    "QuantizerProblem",
    "RdProblem",
    "RdResult",
    "TempTestProblem",
    "TempTestResult",
    "binary_hamming_rd",
    "channel_exponent",
    "detection_exponents",
    "heat_capacity_integral",
    "highres_distortion",
    "highres_rate",
    "mutual_information",
    "phase_transition_scan",
    "quantizer_exponent",
    "quantizer_from_map",
    "rate_distortion",
    "temperature_test_exponents",
]
