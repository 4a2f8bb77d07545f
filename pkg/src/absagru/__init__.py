"""BGRU-based aspect sentiment toolkit: opinion-target extraction with a
BGRU-CNN-CRF tagger and aspect polarity classification with an interactive
attention network, on top of a small reverse-mode autodiff engine."""

__version__ = "0.1.0"

from . import backends

__all__ = ["backends", "__version__"]
