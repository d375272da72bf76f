"""Test package for bandgp."""
