"""Compiler for matrix chains with compile-time-unknown sizes.

Turns a chain shape into a small set of code variants with a run-time
dispatch rule that picks the cheapest one for the actual sizes.
"""

from .frontend import Shape, normalize, parse
from .variants import Variant, build_variant

__version__ = "0.1.0"

__all__ = ["Shape", "Variant", "build_variant", "normalize", "parse", "__version__"]
