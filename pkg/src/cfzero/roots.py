"""Polynomial roots by simultaneous (Aberth-Ehrlich) iteration.

Coefficients are in descending order, as in :func:`numpy.polyval`. The
iteration runs on the monic polynomial in a rescaled variable so that the
roots have magnitude O(1); initial guesses sit on a circle whose radius is
the Fujiwara bound, rotated off the real axis to break symmetry.
"""
from __future__ import annotations

import numpy as np

_EPS = np.finfo(float).eps


class RootFindingError(RuntimeError):
    """The iteration did not converge; ``roots`` holds the last iterate."""

    def __init__(self, message: str, roots: np.ndarray, residuals: np.ndarray):
        super().__init__(message)
        self.roots = roots
        self.residuals = residuals


def trim_leading(coeffs, rtol: float = 0.0) -> np.ndarray:
    """Drop leading coefficients that are zero (or below ``rtol * max|c|``)."""
    c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
    scale = np.max(np.abs(c)) if c.size else 0.0
    k = 0
    while k < c.size - 1 and abs(c[k]) <= rtol * scale:
        k += 1
    return c[k:]


def _horner_with_derivative(c: np.ndarray, z: np.ndarray):
    """Evaluate p and p' for a batch: ``c`` is (B, n+1), ``z`` is (B, n)."""
    p = np.broadcast_to(c[:, :1], z.shape).astype(complex)
    dp = np.zeros_like(p)
    for k in range(1, c.shape[1]):
        dp = dp * z + p
        p = p * z + c[:, k : k + 1]
    return p, dp


def _fujiwara_radius(c: np.ndarray) -> np.ndarray:
    """Upper bound on root magnitudes for monic rows of ``c``."""
    n = c.shape[1] - 1
    k = np.arange(1, n + 1)
    terms = np.abs(c[:, 1:]) ** (1.0 / k)
    terms[:, -1] = (np.abs(c[:, -1]) / 2) ** (1.0 / n)
    return 2 * terms.max(axis=1)


def aberth_batch(
    coeffs: np.ndarray,
    tol: float = 1e-14,
    max_iter: int = 500,
    polish: bool = True,
) -> np.ndarray:
    """Roots of a batch of same-degree polynomials.

    Parameters
    ----------
    coeffs : array_like, shape (B, n+1)
        Descending coefficients; ``coeffs[:, 0]`` must be nonzero.
    tol : float
        Stop when every correction is below ``tol`` times the root scale.
    max_iter : int
        Iteration budget before :class:`RootFindingError` is raised.
    polish : bool
        Finish with two Newton steps on the original (unscaled) polynomial.

    Returns
    -------
    ndarray, shape (B, n)
        Roots of each row, sorted by ascending real part.
    """
    c = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    if np.any(c[:, 0] == 0):
        raise ValueError("leading coefficient must be nonzero")
    B, n1 = c.shape
    n = n1 - 1
    if n == 0:
        return np.empty((B, 0), dtype=complex)
    monic = c / c[:, :1]
    if n == 1:
        return -monic[:, 1:2]

    # rescale z = rho * w so that the roots in w have magnitude <= ~1
    rho = _fujiwara_radius(monic)
    rho = np.where(rho > 0, rho, 1.0)
    scaled = monic * (rho[:, None] ** -np.arange(n1))

    angles = 2 * np.pi * np.arange(n) / n + 0.4
    w = np.broadcast_to(0.5 * np.exp(1j * angles), (B, n)).copy()
    active = np.ones(B, dtype=bool)
    eye = np.eye(n, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        wa = w[idx]
        p, dp = _horner_with_derivative(scaled[idx], wa)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = p / dp
            diff = wa[:, :, None] - wa[:, None, :]
            diff[:, eye] = np.inf
            s = np.sum(1.0 / diff, axis=2)
            step = ratio / (1.0 - ratio * s)
        step = np.where(np.isfinite(step), step, 0.0)
        step = np.where(p == 0, 0.0, step)
        w[idx] = wa - step
        # a root is settled when the step is tiny or |p| is at rounding level
        noise = _horner_with_derivative(np.abs(scaled[idx]), np.abs(wa))[0].real
        settled = (np.abs(step) <= tol) | (np.abs(p) <= 8 * _EPS * noise)
        done = np.all(settled, axis=1)
        active[idx[done]] = False
    roots = w * rho[:, None]
    if np.any(active):
        res = np.abs(np.array([np.polyval(ci, ri) for ci, ri in zip(c, roots)]))
        raise RootFindingError(
            f"Aberth iteration did not converge for {int(active.sum())} of {B} "
            f"polynomials after {max_iter} iterations",
            roots,
            res,
        )
    if polish:
        roots = newton_polish(c, roots)
    order = np.argsort(roots.real, axis=1, kind="stable")
    return np.take_along_axis(roots, order, axis=1)


def newton_polish(coeffs: np.ndarray, roots: np.ndarray, steps: int = 2) -> np.ndarray:
    """A few Newton steps per root, each accepted only if it lowers |p|."""
    c = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    z = np.atleast_2d(np.asarray(roots, dtype=complex)).copy()
    for _ in range(steps):
        p, dp = _horner_with_derivative(c, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            trial = z - p / dp
        ok = np.isfinite(trial)
        pt, _ = _horner_with_derivative(c, np.where(ok, trial, z))
        better = ok & (np.abs(pt) < np.abs(p))
        z = np.where(better, trial, z)
    return z


def polyroots(coeffs, tol: float = 1e-14, max_iter: int = 500) -> np.ndarray:
    """Roots of one polynomial (leading zero coefficients are dropped)."""
    c = trim_leading(coeffs)
    if c.size == 0 or (c.size == 1 and c[0] == 0):
        raise ValueError("zero polynomial has no well-defined roots")
    return aberth_batch(c[None, :], tol=tol, max_iter=max_iter)[0]


def companion_roots(coeffs) -> np.ndarray:
    """Eigenvalues of the companion matrix; used as an independent cross-check."""
    c = trim_leading(coeffs)
    n = c.size - 1
    if n < 1:
        return np.empty(0, dtype=complex)
    comp = np.zeros((n, n), dtype=complex)
    comp[0, :] = -c[1:] / c[0]
    comp[1:, :-1] = np.eye(n - 1)
    r = np.linalg.eigvals(comp)
    return r[np.argsort(r.real, kind="stable")]


def match_roots(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Reorder ``b`` to pair with ``a`` by minimum total distance."""
    from scipy.optimize import linear_sum_assignment

    cost = np.abs(np.asarray(a)[:, None] - np.asarray(b)[None, :])
    _, cols = linear_sum_assignment(cost)
    return np.asarray(b)[cols]
