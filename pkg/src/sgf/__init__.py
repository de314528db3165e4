"""Structured-action floorplanning: environment, k-NN action projection,
actor/critic approximators, offline training and prompted placement."""

__version__ = "0.1.0"
