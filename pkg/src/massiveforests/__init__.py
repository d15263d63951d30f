"""Rooted spanning forests, killed walks, Doob transforms and dimers."""

__version__ = "0.1.0"
