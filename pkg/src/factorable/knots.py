"""Piecewise-linear knot functions.

Used for moduli of continuity (per path and in norm), scaling functions and
discrete Legendre transforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class KnotFunction:
    """A function given by knots ``(x_i, y_i)`` with linear interpolation.

    ``x`` must be strictly increasing. Outside the knot range the boundary
    value is held constant.
    """

    x: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if x.size == 0:
            raise ValueError("knot function needs at least one knot")
        if x.shape != y.shape:
            raise ValueError(f"knot arrays differ in length: {x.size} vs {y.size}")
        if x.size > 1 and np.any(np.diff(x) <= 0):
            raise ValueError("knot abscissae must be strictly increasing")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __call__(self, t):
        return np.interp(t, self.x, self.y)

    def __len__(self):
        return self.x.size

    def is_nondecreasing(self) -> bool:
        return bool(np.all(np.diff(self.y) >= 0))

    def is_convex(self, rtol: float = 1e-9) -> bool:
        """Check convexity of the knot sequence via successive slopes.

        Infinite values are not allowed here.
        """
        if self.x.size < 3:
            return True
        slopes = np.diff(self.y) / np.diff(self.x)
        scale = max(1.0, float(np.max(np.abs(slopes))))
        return bool(np.all(np.diff(slopes) >= -rtol * scale))

    def to_rows(self):
        return list(zip(self.x.tolist(), self.y.tolist()))


class EmpiricalModulus(KnotFunction):
    """Monotone knot function ``delta -> value`` (a modulus of continuity)."""

    def __post_init__(self):
        super().__post_init__()
        if not self.is_nondecreasing():
            raise ValueError("modulus values must be non-decreasing in delta")
