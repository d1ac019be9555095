"""Desk-scale voice conversion lab.

A self-contained laboratory for VAE-based spectral voice conversion with a
WaveNet vocoder, including the machinery to fine-tune the vocoder on
VAE-reconstructed features and to measure why that reduces the feature
mismatch between vocoder training and conversion.
"""

__version__ = "0.1.0"
