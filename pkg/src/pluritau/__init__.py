"""Boundary geometry and invariant volume elements for pseudoconvex domains.

Subpackages implement sparse jet arithmetic (polyjet), domain queries and the
model catalogue (domain), orthogonal frame radii for convex domains (mcneal),
polynomial normal forms and distinguished radii (chonf), scaling sequences
(scaling), extremal-map volume-element estimation (voleval), the asymptotic
experiment drivers (asympt), and the pluritau CLI (cli).
"""

__version__ = "0.1.0"
