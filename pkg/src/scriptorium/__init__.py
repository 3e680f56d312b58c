"""Scribe identification on handwritten line images.

Pipeline: grayscale + ink masking, patch scanning, a small convnet over
patches, mean aggregation to line and page scores, and a reject option.
"""
__version__ = "0.1.0"

from .kernels import BACKEND
