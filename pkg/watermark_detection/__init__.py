"""Detection of misappropriated watermarked LLM text."""

__version__ = "0.1.0"
