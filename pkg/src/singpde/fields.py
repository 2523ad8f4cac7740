"""Closed-form scalar fields used as sources f and as measure densities.

Fields are given analytically rather than as data files so they can be
resampled exactly at any resolution.  Each builtin evaluates on an (N, dim)
array of points and returns an (N,) array; coordinates beyond the declared
center length are ignored, so the same field works in 1, 2 or 3 dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "ScalarField",
    "zero",
    "constant",
    "gaussian_bump",
    "sin_pi",
    "manufactured_singular",
    "scale_field",
]


@dataclass(frozen=True)
class ScalarField:
    name: str
    params: tuple[float, ...]
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.asarray(self.fn(pts), dtype=float)


def zero() -> ScalarField:
    return ScalarField("zero", (), lambda pts: np.zeros(pts.shape[0]))


def constant(value: float) -> ScalarField:
    value = float(value)
    return ScalarField(
        "constant", (value,), lambda pts: np.full(pts.shape[0], value)
    )


def gaussian_bump(
    center: tuple[float, ...], width: float, scale: float = 1.0
) -> ScalarField:
    """scale * exp(-|x - center|^2 / (2 width^2)), center trimmed to dim."""
    center = tuple(float(c) for c in center)
    width = float(width)
    scale = float(scale)
    if width <= 0:
        raise ValueError(f"gaussian width must be positive, got {width}")

    def fn(pts: np.ndarray) -> np.ndarray:
        c = np.asarray(center[: pts.shape[1]])
        r2 = np.sum((pts - c) ** 2, axis=1)
        return scale * np.exp(-r2 / (2.0 * width**2))

    return ScalarField("gaussian_bump", center + (width, scale), fn)


def sin_pi(scale: float = 1.0) -> ScalarField:
    """scale * prod_i sin(pi x_i); vanishes on the box boundary."""
    scale = float(scale)
    return ScalarField(
        "sin_pi",
        (scale,),
        lambda pts: scale * np.prod(np.sin(np.pi * pts), axis=1),
    )


def manufactured_singular(gamma: float) -> ScalarField:
    """Source pi^2 * sin(pi x)^(1+gamma) along the first coordinate.

    Paired with h(s) = s^-gamma this makes u(x) = sin(pi x) the exact 1D
    solution: f(x) h(u(x)) = pi^2 sin(pi x).
    """
    gamma = float(gamma)
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return ScalarField(
        "manufactured_singular",
        (gamma,),
        lambda pts: np.pi**2 * np.sin(np.pi * pts[:, 0]) ** (1.0 + gamma),
    )


def scale_field(f: ScalarField, factor: float) -> ScalarField:
    factor = float(factor)
    return ScalarField(
        f"scaled_{f.name}", f.params + (factor,), lambda pts: factor * f(pts)
    )
