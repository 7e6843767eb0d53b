"""Figure generation from embedding-pipeline text artifacts.

Read-only over its inputs: coordinate TSVs, label files, and variance CSVs
produced by the embedding CLI. Never recomputes embeddings or metrics.
"""

from .figures import FigureSpec, RenderInfo, SchemaError, render

__version__ = "0.1.0"
