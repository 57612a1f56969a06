# Serve with 'uvicorn server:app --host=0.0.0.0 --port=8000'; settings come from DESSIN_CENSUS_* variables or .env
import logging
import os

from dessin_census.api import create_app
from dessin_census.config import load_settings

logging.basicConfig(level=os.getenv("LOG_LEVEL", "info").upper(), handlers=[logging.StreamHandler()])

app = create_app(load_settings(os.getenv("DESSIN_CENSUS_ENV")))

__all__ = ["app"]
