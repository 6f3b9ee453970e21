"""Melodic segment graphs: score ingestion, I-R annotation, DTW k-NN graphs and WL analysis."""

from .errors import MelographError
from .score import NoteEvent, NoteMatrix, parse_musicxml, parse_musicxml_file

__version__ = "0.1.0"

__all__ = ["MelographError", "NoteEvent", "NoteMatrix", "parse_musicxml", "parse_musicxml_file", "__version__"]
