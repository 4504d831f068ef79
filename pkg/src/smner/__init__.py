"""Multitask BLSTM-CRF named entity recognition for noisy social-media text."""

__version__ = "0.1.0"
