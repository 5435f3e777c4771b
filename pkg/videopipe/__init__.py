"""Frame formats, coding workflows and block tiling."""
