"""Parameter sweeps, exceptional-radius scans and named experiments."""

from .presets import CATALOG, list_presets, run_preset
from .report import Check, Curve, ExperimentReport, ExperimentSpec
from .scans import (
    candidate_radii,
    eigfun_distance,
    jump_scan,
    pullback_scale,
    right_continuity_check,
    spectrum_curve,
    transfer,
)

__all__ = [
    "CATALOG",
    "Check",
    "Curve",
    "ExperimentReport",
    "ExperimentSpec",
    "candidate_radii",
    "eigfun_distance",
    "jump_scan",
    "list_presets",
    "pullback_scale",
    "right_continuity_check",
    "run_preset",
    "spectrum_curve",
    "transfer",
]
