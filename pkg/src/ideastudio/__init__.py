"""ideastudio: a self-hostable ideation service for environment concept design.

Brainstorm structured design ideas, research them through keyword-driven
reference search, refine them by combining references or applying
instructions, and chain exploration cycles — over pluggable generative
model and image-search providers, with a persisted idea-lineage graph and
a web UI for steering the process live.
"""

__version__ = "0.1.0"
