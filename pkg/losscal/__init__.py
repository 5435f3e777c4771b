"""Calibrated combination of single losses."""
