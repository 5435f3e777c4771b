"""Hypersphere adversarial objective."""
