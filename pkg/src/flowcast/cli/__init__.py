"""Command-line benchmark harness."""

from .config import RunConfig, load_config, parse_config, render_config
from .main import build_parser, main

__all__ = ["RunConfig", "build_parser", "load_config", "main", "parse_config", "render_config"]
