"""Rydberg-array electric-field sensing: Stark coefficients, blockade dynamics, field estimation."""

from ._core import (
    DriveSpec,
    FieldEstimate,
    ForwardCurve,
    PairCoefficients,
    PeakFidelity,
    RydsenseError,
    SensorRow,
    StarkTable,
    __version__,
    blockade_radius,
    coefficients_at,
    crossover_radius,
    effective_interaction,
    estimate_field,
    forward_curves,
    load_stark_table,
    resonance_field,
    row_correlator,
    row_dynamics,
    row_f_max,
    simulate_readout,
)

__all__ = [
    "DriveSpec",
    "FieldEstimate",
    "ForwardCurve",
    "PairCoefficients",
    "PeakFidelity",
    "RydsenseError",
    "SensorRow",
    "StarkTable",
    "__version__",
    "blockade_radius",
    "coefficients_at",
    "crossover_radius",
    "effective_interaction",
    "estimate_field",
    "forward_curves",
    "load_stark_table",
    "resonance_field",
    "row_correlator",
    "row_dynamics",
    "row_f_max",
    "simulate_readout",
]
