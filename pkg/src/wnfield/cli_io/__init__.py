"""Configuration parsing, run outputs, the verify battery, and the CLI."""

from .config import RunConfig, default_config, load_config, parse_config

__all__ = ["RunConfig", "default_config", "load_config", "parse_config"]
