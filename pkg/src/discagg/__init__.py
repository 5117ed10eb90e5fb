"""Growth of disc clusters by attachment on the convex hull boundary.

Modules: ``geometry`` (incremental hull of discs), ``cluster`` (full runs
and shape metrics), ``vertex_growth`` (the two-disc fork chain),
``anti_ou`` (escape times of the limiting diffusion), ``branches``
(side-branch statistics), ``polygon_flow`` (mean polygon dynamics),
``svg`` and ``cli`` (artifacts).
"""

__version__ = "0.1.0"
