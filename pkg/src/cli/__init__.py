"""Command line layer - argparse entry point binding use cases and adapters."""

from cli.main import build_parser, main

__all__ = ["build_parser", "main"]
