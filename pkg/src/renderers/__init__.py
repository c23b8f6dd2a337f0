"""Rendering and presentation layer for the CLI."""
