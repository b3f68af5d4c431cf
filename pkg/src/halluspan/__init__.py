"""Hallucination span detection for multilingual LLM output.

Two detectors are provided: a sampling-consistency detector with external
context (:func:`detect_mscgh`) and a claim/reference checker
(:func:`detect_mrc`), plus character-level IoU and correlation scoring.
"""

from .anchoring import AnchorResult, MatchMode, anchor_all, anchor_phrase
from .evaluation import ScoreReport, char_iou, score_dataset, soft_correlation
from .gateway import ChatRequest, HttpChatBackend, RecordingBackend, ReplayBackend
from .model import (
    CharSpan,
    ClaimTriplet,
    Prediction,
    Sample,
    SoftLabel,
    load_dataset,
    load_predictions,
    validate_sample,
    write_predictions,
)
from .mrc import MrcConfig, detect_mrc
from .mscgh import MscghConfig, detect_mscgh
from .retrieval import DiskCache, RetrievalConfig, Retriever
from .services import PipelineError, Services
from .spans import (
    ResponseIntervals,
    aggregate_uniform,
    aggregate_weighted,
    merge_intervals,
    overlap_length,
    threshold_hard_labels,
)

__version__ = "0.1.0"
