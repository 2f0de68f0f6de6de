"""Extract-then-abstract code summarization pipeline."""

__version__ = "0.1.0"
