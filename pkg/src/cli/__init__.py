"""Command-line package initialization."""

from .main import main

__all__ = ["main"]
