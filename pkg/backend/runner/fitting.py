"""
Power-law fits of saturated loss against the scaled pulse interval.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy import stats

from backend.quantum.errors import InsufficientPoints

log = logging.getLogger(__name__)

MIN_POINTS = 4


@dataclass(frozen=True)
class PowerLawFit:
    """log(y) = alpha log(x) + c"""
    alpha: float
    c: float
    r_squared: float
    n_points: int

    @property
    def prefactor(self) -> float:
        return math.exp(self.c)

    def predict(self, x) -> np.ndarray:
        return self.prefactor * np.asarray(x, dtype=float) ** self.alpha

    def to_dict(self) -> Dict:
        return {
            'alpha': self.alpha,
            'c': self.c,
            'prefactor': self.prefactor,
            'r_squared': self.r_squared,
            'n_points': self.n_points,
        }


def fit_power_law(x: Sequence[float], y: Sequence[float]) -> PowerLawFit:
    """
    Least-squares line through (log x, log y).

    Points with nonpositive x or y carry no information on a log scale and
    are dropped before counting.

    Raises:
        InsufficientPoints: fewer than 4 usable points
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    usable = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if usable.sum() < MIN_POINTS:
        raise InsufficientPoints(f"need at least {MIN_POINTS} positive points, got {int(usable.sum())}")
    if usable.sum() < len(x):
        log.warning(f"Dropped {len(x) - int(usable.sum())} point(s) with nonpositive values")
    result = stats.linregress(np.log(x[usable]), np.log(y[usable]))
    return PowerLawFit(
        alpha=float(result.slope),
        c=float(result.intercept),
        r_squared=float(result.rvalue ** 2),
        n_points=int(usable.sum()),
    )


def collapse_spread(groups: Dict[int, Tuple[Sequence[float], Sequence[float]]], alpha: float) -> float:
    """
    Relative spread of curves that should collapse onto one power law.

    Each group (x, y) gets the prefactor k = geometric mean of y / x^alpha;
    the spread is (max k - min k) / mean k over the groups.
    """
    prefactors = []
    for _, (x, y) in sorted(groups.items()):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        usable = (x > 0) & (y > 0)
        if usable.any():
            prefactors.append(math.exp(float(np.mean(np.log(y[usable]) - alpha * np.log(x[usable])))))
    if len(prefactors) < 2:
        return 0.0
    prefactors = np.asarray(prefactors)
    return float((prefactors.max() - prefactors.min()) / prefactors.mean())
