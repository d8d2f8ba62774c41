from ._lowlat import (
    ComparisonError,
    MeasurementError,
    Model,
    ValidationError,
    analyze,
    bank_prototype,
    compare_reports,
    design_bank,
    excitation,
    integrated_lufs,
    latency_budget,
    load_spec,
    loudness_report,
    measure_bank,
    measure_latency,
    measure_receptive_field,
    measure_rtf,
    mfcc_textures,
    mmd,
    normalize_to_lufs,
    onset,
    pitch_report,
    pitch_track,
    process_offline,
    run_protocol,
    similarity,
    strip_timing,
    validate,
)

__all__ = [
    "ComparisonError",
    "MeasurementError",
    "Model",
    "ValidationError",
    "analyze",
    "bank_prototype",
    "compare_reports",
    "design_bank",
    "excitation",
    "integrated_lufs",
    "latency_budget",
    "load_spec",
    "loudness_report",
    "measure_bank",
    "measure_latency",
    "measure_receptive_field",
    "measure_rtf",
    "mfcc_textures",
    "mmd",
    "normalize_to_lufs",
    "onset",
    "pitch_report",
    "pitch_track",
    "process_offline",
    "run_protocol",
    "similarity",
    "strip_timing",
    "validate",
]
