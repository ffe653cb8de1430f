"""Localized visual-text alignment inference over patch-embedding bundles.

Two-stage confidence-aware region discovery (class-agnostic greedy box search,
then text-guided refinement) followed by object-context dual-channel crop
aggregation.  See the README for the CLI and file formats.
"""

__version__ = "0.1.0"
