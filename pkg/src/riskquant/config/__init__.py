"""
Configuration package: process settings and experiment configuration models.
"""
from src.riskquant.config.settings import Settings, settings

__all__ = ["Settings", "settings"]
