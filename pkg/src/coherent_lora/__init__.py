"""Coherent and non-coherent LoRa detection under same-SF interference.

Baseband chirp modulation and receivers, the interference pattern model and
its closed-form projections, analytical SER/FER evaluators, a Monte Carlo
engine and an experiment runner.
"""

from coherent_lora.chirp import (
    LoraParams,
    PhaseEstimate,
    apply_awgn,
    dechirp_dft,
    detect_coherent,
    detect_noncoherent,
    estimate_phase,
    generate_reference,
    generate_symbol,
)
from coherent_lora.interference import (
    InterfererConfig,
    cfo_phasor,
    interferer_waveform,
    projection_closed_form,
    received_pattern,
    relevant_bins,
)

__version__ = "0.1.0"

__all__ = [
    "LoraParams",
    "PhaseEstimate",
    "InterfererConfig",
    "apply_awgn",
    "cfo_phasor",
    "dechirp_dft",
    "detect_coherent",
    "detect_noncoherent",
    "estimate_phase",
    "generate_reference",
    "generate_symbol",
    "interferer_waveform",
    "projection_closed_form",
    "received_pattern",
    "relevant_bins",
]
