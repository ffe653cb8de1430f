"""One-shot adapter from real images to LAGO0001 feature bundles."""

__version__ = "0.1.0"
