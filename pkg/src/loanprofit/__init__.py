"""Two-stage profit scoring of peer-to-peer loans with histogram GBDT."""

__version__ = "0.1.0"
