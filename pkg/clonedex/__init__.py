"""Token-bag code clone detection with a partial inverted index."""

__version__ = "1.0.0"
