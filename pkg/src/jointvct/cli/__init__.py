from .fdr import fdr_adjust
from .main import build_parser, main

__all__ = ["build_parser", "fdr_adjust", "main"]
