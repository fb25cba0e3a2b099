"""
Transitive Boolean Function Toolkit

Pointer-function constructions composed with permutation-invariant cell
codecs, the groups that act on them, and an exact complexity-measure engine.
"""

__version__ = "0.1.0"
