"""Type-directed qubit allocation for a linear first-order quantum language."""

import sys

from .syntax import CouplingGraph, SourceProgram, TargetProgram

# programs are deep right-nested trees; the checkers and interpreters recurse on them
sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))

__all__ = ["CouplingGraph", "SourceProgram", "TargetProgram"]
__version__ = "0.1.0"
