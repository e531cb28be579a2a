"""Abusive-language detection: corpus ingestion, features, hybrid CNN-LSTM model, baselines and evaluation."""

__version__ = "0.1.0"
