"""Numerical verification of biharmonic pmc submanifolds in S^n(c) x R."""

__version__ = "0.1.0"

from .ambient import AmbientSpace, curvature_barR  # noqa: E402
from .catalog import from_id  # noqa: E402
from .extrinsic import extrinsic_data  # noqa: E402
from .immersion import ImmersionSpec  # noqa: E402

__all__ = ["__version__", "AmbientSpace", "ImmersionSpec", "curvature_barR", "extrinsic_data", "from_id"]
