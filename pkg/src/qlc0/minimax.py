"""Discrete minimax polynomial fitting by single-point exchange.

Fits a degree-``D`` polynomial to values ``f`` on a finite set of distinct
points so as to minimize the maximum absolute error. Polynomials satisfy the
Haar condition on distinct points, so the best approximation is unique and
equioscillates on ``D + 2`` reference points; the exchange below walks
between references until the levelled error matches the global maximum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev

from .errors import ArgumentError


@dataclass(frozen=True)
class MinimaxFit:
    values: np.ndarray  # polynomial values at the fit points
    error: float  # max |p - f| over the points
    coeffs: np.ndarray  # Chebyshev coefficients on the mapped interval [-1, 1]
    iterations: int


def _mapped(points: np.ndarray) -> np.ndarray:
    lo, hi = points.min(), points.max()
    if hi == lo:
        return np.zeros_like(points, dtype=float)
    return (2 * points - (lo + hi)) / (hi - lo)


def _initial_reference(npts: int, size: int, t: np.ndarray) -> list[int]:
    # Chebyshev extrema mapped to the nearest distinct sample indices
    targets = -np.cos(np.pi * np.arange(size) / (size - 1))
    ref: list[int] = []
    for tau in targets:
        order = np.argsort(np.abs(t - tau), kind="stable")
        for idx in order:
            if idx not in ref:
                ref.append(int(idx))
                break
    return sorted(ref)


def minimax_fit(points, f, degree: int, tol: float = 1e-13, max_iter: int = 500) -> MinimaxFit:
    points = np.asarray(points, dtype=float)
    f = np.asarray(f, dtype=float)
    if points.shape != f.shape or points.ndim != 1:
        raise ArgumentError("points and values must be matching 1-d arrays")
    if len(np.unique(points)) != len(points):
        raise ArgumentError("fit points must be distinct")
    if degree < 0:
        raise ArgumentError("degree must be non-negative")
    order = np.argsort(points)
    x, y = points[order], f[order]
    t = _mapped(x)
    npts = len(x)
    if degree + 1 >= npts:
        # interpolation is exact
        deg = npts - 1
        coeffs = np.linalg.solve(chebyshev.chebvander(t, deg), y)
        vals = chebyshev.chebval(t, coeffs)
        out = np.empty_like(vals)
        out[order] = vals
        return MinimaxFit(out, float(np.abs(vals - y).max()), coeffs, 0)

    size = degree + 2
    ref = _initial_reference(npts, size, t)
    vander = chebyshev.chebvander(t, degree)
    alt = (-1.0) ** np.arange(size)
    for it in range(1, max_iter + 1):
        system = np.hstack([vander[ref], alt[:, None]])
        sol = np.linalg.solve(system, y[ref])
        coeffs, level = sol[:-1], sol[-1]
        resid = y - vander @ coeffs
        worst = int(np.argmax(np.abs(resid)))
        if np.abs(resid[worst]) <= abs(level) * (1 + 1e-12) + tol:
            break
        ref = _exchange(ref, worst, resid)
    vals = vander @ coeffs
    out = np.empty_like(vals)
    out[order] = vals
    return MinimaxFit(out, float(np.abs(vals - y).max()), coeffs, it)


def _exchange(ref: list[int], new: int, resid: np.ndarray) -> list[int]:
    """Swap ``new`` into the reference keeping residual signs alternating."""
    sign = np.sign(resid[new])
    ref = list(ref)
    if new < ref[0]:
        if np.sign(resid[ref[0]]) == sign:
            ref[0] = new
        else:
            ref = [new] + ref[:-1]
    elif new > ref[-1]:
        if np.sign(resid[ref[-1]]) == sign:
            ref[-1] = new
        else:
            ref = ref[1:] + [new]
    else:
        j = int(np.searchsorted(ref, new)) - 1  # ref[j] < new < ref[j+1]
        if np.sign(resid[ref[j]]) == sign:
            ref[j] = new
        else:
            ref[j + 1] = new
    return ref
