"""Desk-scale knowledge-graph embedding: structure and text link-prediction
models trained jointly by co-distillation, with filtered-ranking evaluation."""

__version__ = "0.1.0"
