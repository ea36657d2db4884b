# src/interfaces/__init__.py
"""
User-facing entry points: the `hifdta` click command group.
"""

from .cli_interface import cli, main

__all__ = [
    'cli',
    'main'
]
