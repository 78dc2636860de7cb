from .recalibration import recalibrate
from .service import create_app, parse_multipart
from .store import (AlreadyDecidedError, FeedbackRow, InsufficientFeedbackError,
                    ModerationStore, ReviewItem, UnknownItemError)

__all__ = [
    "AlreadyDecidedError", "FeedbackRow", "InsufficientFeedbackError",
    "ModerationStore", "ReviewItem", "UnknownItemError", "create_app",
    "parse_multipart", "recalibrate",
]
