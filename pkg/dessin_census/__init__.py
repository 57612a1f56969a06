"""Census of regular dessins via torsion-free normal subgroups of triangle groups."""

__all__ = [
    "bounds",
    "census",
    "config",
    "fpgroup",
    "models",
    "normal_search",
    "quotient",
    "signatures",
    "singerman",
    "store",
]
