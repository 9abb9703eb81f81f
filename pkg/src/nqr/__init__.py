"""Quotation recommendation: retrieval, token-level novelty reranking, evaluation."""

__version__ = "0.1.0"
