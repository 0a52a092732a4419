"""
CLI Package

Subcommands driving simulations, searches and the gain predictor.
"""

from .commands import build_parser, main

__all__ = ['build_parser', 'main']
