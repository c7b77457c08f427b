"""Toolkit for common Haar random state constructions.

Submodules cover dense linear algebra on labelled registers, Haar sampling,
Clifford classical shadows, the shadow-based one-way puzzle, threshold
search and OWSG attacks, and swap-oracle simulation from copies.
"""

__version__ = "0.1.0"
SCHEMA = "chrslab/1"
