"""Robust graph signal processing: filters, perturbations, sampling, robust identification and topology inference."""

import logging

from .errors import RgspError
from .graph_core import Gso, GraphFilter, GsoKind, SignalSet

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = ["Gso", "GsoKind", "GraphFilter", "SignalSet", "RgspError", "__version__"]
