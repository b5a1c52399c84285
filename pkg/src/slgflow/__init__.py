"""Flows u_t = F(D^2 u) with a prescribed gradient image Du(domain) = target.

Subpackages follow the pipeline: geometry (domains, grids) -> operators
(eigenvalue functions) -> solver (time stepping, boundary projection) ->
transform (convex conjugate checks) -> diagnostics (invariant monitors) ->
cli (configs, presets, artifacts).
"""

__version__ = "0.1.0"
