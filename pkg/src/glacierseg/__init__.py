"""Glacier segmentation workbench.

Band equalization, polygon-driven patch sampling, a from-scratch trainable
U-Net, activation analysis, and per-patch error analysis served over HTTP.
"""

__version__ = "0.1.0"
