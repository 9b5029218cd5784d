"""Cargo-damage decision support: triangulated inspection sampling over a
container yard, proximity-based status estimation, surface-damage scoring,
timing accounts, and a small session service."""

__version__ = "0.1.0"
