"""Coronary dominance classification on synthetic cine angiography.

The pipeline: synthesize cine studies with a planted dominance signal,
gate frames by informativeness, train a small CNN with a weighted
noise-robust loss, and vote per view by summing frame logits.
"""

__version__ = "0.1.0"

from domvote.dataio import Artery, Dominance, Frame, CineView, Study

__all__ = [
    "Artery",
    "Dominance",
    "Frame",
    "CineView",
    "Study",
    "__version__",
]
