"""HTTP service exposing the experiment runner."""

from .app import create_app

__all__ = ["create_app"]
