"""
Process-level settings for riskquant.
Values come from environment variables (a local .env file is honoured) with
defaults suited to desk-scale runs.
"""
import os
from pathlib import Path
from typing import Dict, Union

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

from src.riskquant.exceptions import ConfigError

# Load environment variables from .env file if it exists
env_path = Path(__file__).resolve().parent.parent.parent.parent / ".env"
load_dotenv(dotenv_path=env_path)

_ENV_PREFIX = "RISKQUANT_"


class Settings(BaseModel):
    """Application settings from environment variables and defaults."""

    LOG_LEVEL: str = Field(default="INFO", description="Log level for structlog output")
    ENVIRONMENT: str = Field(default="development", description="development renders console logs, production renders JSON")
    THREADS: int = Field(default=1, ge=1, description="Cap on worker threads for independent runs")
    ENABLE_METRICS: bool = Field(default=True, description="Whether run metrics are logged as events")
    OUTPUT_DIR: str = Field(default="./runs", description="Default root for artifact directories")

    def __init__(self, **kwargs):
        """Initialize settings, loading RISKQUANT_* environment variables."""
        env_vars = {}
        for field in type(self).model_fields:
            env_value = os.environ.get(_ENV_PREFIX + field)
            if env_value is not None:
                env_vars[field] = env_value.strip()

        env_vars.update(kwargs)
        try:
            super().__init__(**env_vars)
        except ValidationError as exc:
            errors = {}
            for err in exc.errors():
                field = str(err["loc"][0]) if err["loc"] else "settings"
                name = field if field in kwargs else _ENV_PREFIX + field
                errors[name] = f"{err['msg']}, got {err.get('input')!r}"
            raise ConfigError(errors, source="environment") from None

    @property
    def is_production(self) -> bool:
        """Check if the environment is production."""
        return self.ENVIRONMENT.lower() == "production"

    def to_dict(self) -> Dict[str, Union[str, int, bool]]:
        """
        Convert settings to a dictionary.

        Returns:
            Dictionary of settings
        """
        return self.model_dump()


# Create a global settings instance
settings = Settings()
