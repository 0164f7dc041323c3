"""HTTP deployment of the toolkit: FastAPI app plus request/response models.

Run locally with:  uvicorn evoapprox.service:app
"""

from .app import app, create_app

__all__ = ["app", "create_app"]
