"""Bethe-ansatz laboratory for the twisted inhomogeneous rational spin chain.

Modules: :mod:`tensor_core` (R-matrix, transfer matrix, B-operators),
:mod:`scalar_factors` (ψ, r), :mod:`bae` (Bethe equations and eigenvectors),
:mod:`sequential` (pinching), :mod:`semiclassical` (ħ → 0), :mod:`cli`.
"""

__version__ = "0.1.0"
