"""Wavelet-band forensics toolkit for AI-generated video detection."""

__version__ = "0.1.0"
