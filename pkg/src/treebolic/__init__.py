"""Embeddings between regular rooted trees, symbolic Cantor sets and
treebolic spaces, decided and constructed with exact arithmetic."""

__version__ = "0.1.0"
