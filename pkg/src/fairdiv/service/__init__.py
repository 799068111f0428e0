"""HTTP service wrapper around the allocation pipelines."""

from .app import create_app

__all__ = ["create_app"]
