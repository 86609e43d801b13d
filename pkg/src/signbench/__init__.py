"""Bag-of-visual-words and from-scratch CNN image classification benchmark."""

__version__ = "0.1.0"
