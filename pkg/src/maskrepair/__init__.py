"""Post-processing for per-object video segmentation masks.

Ranks raw object proposals, then repairs frames whose masks drop parts of
an object by borrowing evidence from neighbouring frames through optical
flow.
"""
from .flow import FlowField, FlowParams, estimate_flow, warp_mask
from .masks import SequenceBundle
from .metrics import boundary_f, evaluate_sequence, global_summary, jaccard
from .selection import SelectionConfig, score_objects, select_top
from .sequence_io import DatasetLayout, load_sequence, save_masks
from .synthetic import Defect, SceneScript, inject_defects, render
from .temporal import InconsistencyReport, Status, TcConfig, detect_inconsistent, diagnose, run_tc

__all__ = [
    "DatasetLayout",
    "Defect",
    "FlowField",
    "FlowParams",
    "InconsistencyReport",
    "SceneScript",
    "SelectionConfig",
    "SequenceBundle",
    "Status",
    "TcConfig",
    "boundary_f",
    "detect_inconsistent",
    "diagnose",
    "estimate_flow",
    "evaluate_sequence",
    "global_summary",
    "inject_defects",
    "jaccard",
    "load_sequence",
    "render",
    "run_tc",
    "save_masks",
    "score_objects",
    "select_top",
    "warp_mask",
]
