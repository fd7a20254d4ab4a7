"""relaug: automatic feature augmentation over relational corpora."""

__version__ = "0.1.0"
