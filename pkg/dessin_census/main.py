"""Entrypoint for serving the census API via `python -m dessin_census.main`."""

from __future__ import annotations

import logging
import os

import uvicorn

from .api import create_app
from .config import load_settings


def run() -> None:
    level = os.getenv("LOG_LEVEL", "info")
    logging.basicConfig(level=level.upper(), handlers=[logging.StreamHandler()])
    settings = load_settings(os.getenv("DESSIN_CENSUS_ENV"))
    app = create_app(settings)
    uvicorn.run(
        app,
        host="0.0.0.0",
        port=int(os.getenv("PORT", "8000")),
        log_level=level,
    )


if __name__ == "__main__":  # pragma: no cover
    run()
