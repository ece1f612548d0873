"""FastAPI service wrapping the claim identification package."""

from .app import create_app

__all__ = ["create_app"]
