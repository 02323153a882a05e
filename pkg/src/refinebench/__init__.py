"""Build imperfect-visual-query benchmarks and score query refinement agents."""

from .corrupt import IMPERFECT_KINDS, KINDS, CorruptionSpec, DistractorPool, apply_corruption
from .metrics import aggregate, parameter_score, substring_exact_match, tool_selection_accuracy
from .pipeline import EvalRecord, RunConfig, run_benchmark, run_sample
from .raster import BBox, bbox_iou, load_image, save_image
from .retrieve import build_index, fingerprint_embedder, recall_at_k, search_topk
from .tools import ToolCall, execute_trace, validate_call
from .triplets import RefinementTriplet, export_sft, generate, read_manifest, verify

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "CorruptionSpec",
    "DistractorPool",
    "EvalRecord",
    "IMPERFECT_KINDS",
    "KINDS",
    "RefinementTriplet",
    "RunConfig",
    "ToolCall",
    "aggregate",
    "apply_corruption",
    "bbox_iou",
    "build_index",
    "execute_trace",
    "export_sft",
    "fingerprint_embedder",
    "generate",
    "load_image",
    "parameter_score",
    "read_manifest",
    "recall_at_k",
    "run_benchmark",
    "run_sample",
    "save_image",
    "search_topk",
    "substring_exact_match",
    "tool_selection_accuracy",
    "validate_call",
    "verify",
]
