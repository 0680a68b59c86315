"""Real-time practice sessions: metrics, references, engine, service."""
from .broadcast import Broadcaster, Subscription
from .engine import (
    ChunkError,
    Deviation,
    EngineError,
    FeedbackFrame,
    FeedbackSession,
    PHASE_CALIBRATING,
    PHASE_IDLE,
    PHASE_PRACTICING,
    PHASE_REVIEW,
    PhaseError,
    PitchSummary,
    ReviewSummary,
)
from .metrics import BinComputer, BinMetrics, DEFAULT_GRID_MS, STABILITY_SPAN_BINS
from .reference import (
    ReferenceBin,
    ReferenceError,
    ReferenceTrace,
    build_reference,
    derive_calibration,
)
from .service import FeedbackService, ReferenceLibrary, create_app

__all__ = [
    "BinComputer",
    "BinMetrics",
    "Broadcaster",
    "ChunkError",
    "DEFAULT_GRID_MS",
    "Deviation",
    "EngineError",
    "FeedbackFrame",
    "FeedbackService",
    "FeedbackSession",
    "PHASE_CALIBRATING",
    "PHASE_IDLE",
    "PHASE_PRACTICING",
    "PHASE_REVIEW",
    "PhaseError",
    "PitchSummary",
    "ReferenceBin",
    "ReferenceError",
    "ReferenceLibrary",
    "ReferenceTrace",
    "ReviewSummary",
    "STABILITY_SPAN_BINS",
    "Subscription",
    "build_reference",
    "create_app",
    "derive_calibration",
]
