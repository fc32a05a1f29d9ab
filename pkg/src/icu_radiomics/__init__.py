"""Radiomics, lobe-wise opacity quantification and random-forest evaluation for ICU-admission prediction on chest CT."""

__version__ = "0.1.0"
