"""Two-stage generator training."""
