"""Bjøntegaard delta bitrate between two rate-distortion curves."""

import logging

import numpy as np
from scipy.interpolate import PchipInterpolator

from models import RDCurve


logger = logging.getLogger(__name__)

MIN_POINTS = 4


def overlap(anchor: RDCurve, test: RDCurve):
    """Shared quality interval of the two curves."""
    low = max(anchor.qualities.min(), test.qualities.min())
    high = min(anchor.qualities.max(), test.qualities.max())
    if high <= low:
        raise ValueError(f"Quality ranges do not overlap: [{low}, {high}]")
    return float(low), float(high)


def _cubic_integral(curve: RDCurve, low: float, high: float) -> float:
    coeffs = np.polyfit(curve.qualities, np.log10(curve.rates), 3)
    integral = np.polyint(coeffs)
    return float(np.polyval(integral, high) - np.polyval(integral, low))


def _pchip_integral(curve: RDCurve, low: float, high: float) -> float:
    order = np.argsort(curve.qualities)
    qualities = curve.qualities[order]
    if np.any(np.diff(qualities) <= 0):
        raise ValueError(f"Piecewise BD-rate needs distinct qualities, got {qualities.tolist()}")
    spline = PchipInterpolator(qualities, np.log10(curve.rates)[order])
    return float(spline.integrate(low, high))


def bd_rate(anchor: RDCurve, test: RDCurve, piecewise: bool = False) -> float:
    """Average bitrate difference in percent at equal quality; negative is a coding gain.

    log10(rate) is fitted as a cubic of quality (or a PCHIP spline when piecewise)
    and the difference is integrated over the overlapping quality range.
    """
    for name, curve in (("anchor", anchor), ("test", test)):
        if len(curve.points) < MIN_POINTS:
            raise ValueError(f"{name} curve has {len(curve.points)} points, BD-rate needs {MIN_POINTS}")
    if anchor.metric_id != test.metric_id:
        raise ValueError(f"Curves measure different metrics: {anchor.metric_id} vs {test.metric_id}")

    low, high = overlap(anchor, test)
    integrate = _pchip_integral if piecewise else _cubic_integral
    mean_diff = (integrate(test, low, high) - integrate(anchor, low, high)) / (high - low)
    return (10.0 ** mean_diff - 1.0) * 100.0
