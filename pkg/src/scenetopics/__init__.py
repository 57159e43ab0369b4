"""Streaming nonparametric topic modelling of visual-word streams, with perplexity-based anomaly scoring."""

from .cells import CellIndex, GridBounds, NeighborhoodSpec, cell_of, neighbors
from .model import NEW_TOPIC, CountTables, Hyperparams, TopicModel
from .stream import VocabularyLayout, WordObservation, parse_stream, write_stream

__version__ = "0.1.0"

__all__ = [
    "CellIndex",
    "CountTables",
    "GridBounds",
    "Hyperparams",
    "NEW_TOPIC",
    "NeighborhoodSpec",
    "TopicModel",
    "VocabularyLayout",
    "WordObservation",
    "cell_of",
    "neighbors",
    "parse_stream",
    "write_stream",
]
