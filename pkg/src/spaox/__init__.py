"""Simulated spectroscopic photoacoustic (sPA) imaging toolkit:
Monte Carlo light transport in layered tissue, sPA image synthesis,
linear-unmixing oximetry, and segmentation/sO2 evaluation metrics."""

__version__ = "0.1.0"
