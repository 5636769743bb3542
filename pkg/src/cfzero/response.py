"""Linearized frequency response of the Bloch model: reflection, poles, zeros.

Under weak excitation (``sz ~ -1``) a drive ``b_in = b0 exp(-i w t)`` gives
steady amplitudes ``v = (A, sm_1, sm_2, sm_3) exp(-i w t)`` solving
``M(w) v = (k_r b0, 0, 0, 0)`` with

    M(w) = [[alpha(w), i g^T],
            [i g,      diag D(w)]],
    alpha(w) = i (w_c - w) + 1/tau_r + 1/tau_i,
    D_j(w)   = i (w_aj - w) + Gamma_j / 2.

Cramer's rule gives ``A = k_r b0 prod(D) / det M`` and therefore

    r(w) = b_out / b_in = -1 + (2/tau_r) prod(D) / det M.

Equivalently ``M(w) = i (H - w)`` with ``H`` the non-Hermitian mode matrix,
so poles are the eigenvalues of ``H``. Zeros are the eigenvalues of the same
matrix with the radiative damping sign reversed.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Literal, Sequence

import numpy as np

from .model import BlochParams, ComplexFreq, as_complex
from .roots import RootFindingError, polyroots

Kind = Literal["pole", "zero"]

#: Cells of a heatmap that fall on a pole get this finite value (and a flag).
SENTINEL = 1e12
#: Root pairs of num/den closer than this (times omega_c) cancel.
CANCEL_RTOL = 1e-7
#: Evaluation this close (times omega_c) to a pole is refused.
POLE_GUARD_RTOL = 1e-12
#: Two smallest singular values closer than this (relative) mean a degenerate null space.
DEGENERACY_RTOL = 1e-6


class PoleEvaluationError(ArithmeticError):
    """Reflection requested at (or numerically on top of) a pole."""

    def __init__(self, omega: complex, pole: complex):
        super().__init__(f"omega={omega!r} lies within the pole guard of {pole!r}")
        self.omega = omega
        self.pole = pole


# --------------------------------------------------------------------------- linear system


def _mode_matrix(p: BlochParams, radiative_sign: float = 1.0) -> np.ndarray:
    """``H = K - i diag(loss)``; ``radiative_sign=-1`` flips the waveguide damping."""
    H = np.zeros((4, 4), dtype=complex)
    H[0, 0] = p.omega_c - 1j * (radiative_sign * p.radiative_rate + p.internal_rate)
    H[0, 1:] = p.g
    H[1:, 0] = p.g
    H[1:, 1:] = np.diag(np.asarray(p.omega_a) - 0.5j * np.asarray(p.gamma_s))
    return H


def _cofactor_det(m: np.ndarray) -> complex:
    """Laplace expansion along the first row (independent of LU)."""
    n = m.shape[0]
    if n == 1:
        return complex(m[0, 0])
    if n == 2:
        return complex(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    total = 0j
    for j in range(n):
        if m[0, j] != 0:
            minor = np.delete(m[1:], j, axis=1)
            total += (-1) ** j * m[0, j] * _cofactor_det(minor)
    return total


@dataclass(frozen=True)
class LinearSystem:
    """``M(w) v = s`` for the weakly excited Bloch model."""

    params: BlochParams

    @property
    def g(self) -> np.ndarray:
        return np.asarray(self.params.g)

    def alpha(self, omega) -> np.ndarray:
        p = self.params
        w = np.asarray(omega, dtype=complex)
        return 1j * (p.omega_c - w) + p.radiative_rate + p.internal_rate

    def D(self, omega) -> np.ndarray:
        """Qubit diagonal, shape ``(..., 3)``."""
        p = self.params
        w = np.asarray(omega, dtype=complex)[..., None]
        return 1j * (np.asarray(p.omega_a) - w) + 0.5 * np.asarray(p.gamma_s)

    def matrix(self, omega) -> np.ndarray:
        """``M(w)``; vectorized over any array of ``w`` (trailing 4x4 axes)."""
        w = np.asarray(omega, dtype=complex)
        M = np.zeros(w.shape + (4, 4), dtype=complex)
        M[..., 0, 0] = self.alpha(w)
        M[..., 0, 1:] = 1j * self.g
        M[..., 1:, 0] = 1j * self.g
        d = self.D(w)
        for j in range(3):
            M[..., j + 1, j + 1] = d[..., j]
        return M

    def zero_matrix(self, omega) -> np.ndarray:
        """``M(w)`` with the radiative damping reversed; singular exactly at zeros of r."""
        M = self.matrix(omega)
        M[..., 0, 0] -= 2 * self.params.radiative_rate
        return M

    def source(self, b0: complex = 1.0) -> np.ndarray:
        return np.array([self.params.k_r * b0, 0, 0, 0], dtype=complex)

    def det(self, omega) -> np.ndarray:
        """Determinant by LU factorization."""
        return np.linalg.det(self.matrix(omega))

    def det_schur(self, omega) -> np.ndarray:
        """``det(D) * (alpha + sum_j g_j^2 / D_j)``."""
        d = self.D(omega)
        return np.prod(d, axis=-1) * (self.alpha(omega) + np.sum(self.g**2 / d, axis=-1))

    def det_cofactor(self, omega: complex) -> complex:
        return _cofactor_det(self.matrix(omega))

    def solve(self, omega: complex, b0: complex = 1.0) -> np.ndarray:
        """Steady amplitudes ``(A, sm_1, sm_2, sm_3)``."""
        return np.linalg.solve(self.matrix(omega), self.source(b0))

    def poles(self) -> np.ndarray:
        """Eigenvalues of the mode matrix restricted to coupled qubits.

        Qubits with ``g_j = 0`` are invisible from the port, so their bare
        frequencies are not poles of r. Used for guards only; the reported
        poles come from the polynomial route.
        """
        keep = [0] + [j + 1 for j, gj in enumerate(self.params.g) if gj != 0]
        H = _mode_matrix(self.params)[np.ix_(keep, keep)]
        return np.linalg.eigvals(H)


def build_linear_system(p: BlochParams) -> LinearSystem:
    return LinearSystem(p)


# --------------------------------------------------------------------------- reflection


def _guard(p: BlochParams, omega: np.ndarray, poles: np.ndarray) -> np.ndarray:
    """Boolean mask of points inside the pole guard."""
    dist = np.min(np.abs(omega[..., None] - poles), axis=-1)
    return dist <= POLE_GUARD_RTOL * p.omega_c


def reflection_array(p: BlochParams, omega, *, guard: bool = True) -> np.ndarray:
    """Vectorized r(w). Points inside the pole guard raise :class:`PoleEvaluationError`."""
    sys_ = LinearSystem(p)
    w = np.asarray(omega, dtype=complex)
    if guard:
        poles = sys_.poles()
        bad = _guard(p, w, poles)
        if np.any(bad):
            w_bad = complex(w[bad].flat[0])
            raise PoleEvaluationError(w_bad, complex(poles[np.argmin(np.abs(poles - w_bad))]))
    # Cramer's rule: A = k_r b0 prod(D) / det M. Dividing through by prod(D)
    # (Schur form) keeps decoupled qubits (g_j = 0) from producing 0/0.
    g = np.asarray(p.g)
    coupled = g != 0
    with np.errstate(divide="ignore", invalid="ignore"):
        schur = sys_.alpha(w) + np.sum(g[coupled] ** 2 / sys_.D(w)[..., coupled], axis=-1)
        A_over_b = p.k_r / schur
    A_over_b = np.where(np.isfinite(schur), A_over_b, 0.0)
    return -1.0 + p.k_r * A_over_b


def reflection(p: BlochParams, omega: ComplexFreq | complex) -> complex:
    """Reflection coefficient ``r = b_out / b_in`` at one complex frequency."""
    return complex(reflection_array(p, np.asarray(as_complex(omega)))[()])


# --------------------------------------------------------------------------- rational form


def _affine(slope: complex, offset: complex) -> np.ndarray:
    return np.array([slope, offset], dtype=complex)


def _poly_from_roots(lead: complex, roots: Sequence[complex]) -> np.ndarray:
    c = np.array([lead], dtype=complex)
    for z in roots:
        c = np.polymul(c, [1.0, -z])
    return c


@dataclass(frozen=True)
class RationalReflection:
    """``r(w) = num(u) / den(u)`` with ``u = w - center``.

    ``num_full``/``den_full`` are the degree-4 polynomials obtained by
    expanding Cramer's rule. ``num``/``den`` are the same after removing
    common root pairs closer than ``cancel_tol``; ``cancelled`` lists them.
    """

    center: float
    num_full: np.ndarray
    den_full: np.ndarray
    num: np.ndarray
    den: np.ndarray
    cancel_tol: float
    cancelled: tuple[complex, ...] = ()
    params: BlochParams | None = field(default=None, compare=False)

    @property
    def num_degree(self) -> int:
        return len(self.num) - 1

    @property
    def den_degree(self) -> int:
        return len(self.den) - 1

    def __call__(self, omega) -> np.ndarray:
        u = np.asarray(omega, dtype=complex) - self.center
        return np.polyval(self.num_full, u) / np.polyval(self.den_full, u)

    def reduced(self, omega) -> np.ndarray:
        u = np.asarray(omega, dtype=complex) - self.center
        return np.polyval(self.num, u) / np.polyval(self.den, u)

    def roots(self, kind: Kind, reduced: bool = True) -> np.ndarray:
        if kind == "zero":
            c = self.num if reduced else self.num_full
        elif kind == "pole":
            c = self.den if reduced else self.den_full
        else:
            raise ValueError(f"kind must be 'pole' or 'zero', got {kind!r}")
        if len(c) <= 1:
            return np.empty(0, dtype=complex)
        return polyroots(c) + self.center


def build_rational(p: BlochParams, cancel_rtol: float = CANCEL_RTOL) -> RationalReflection:
    """Expand r(w) over the common denominator ``det M``.

    The determinant is assembled from affine factors through the Schur form
    ``alpha prod(D) + sum_j g_j^2 prod_{k != j} D_k``, then
    ``num = (2/tau_r) prod(D) - det M``.
    """
    center = p.omega_c
    alpha = _affine(-1j, 1j * (p.omega_c - center) + p.radiative_rate + p.internal_rate)
    D = [_affine(-1j, 1j * (wa - center) + 0.5 * gs) for wa, gs in zip(p.omega_a, p.gamma_s)]
    prodD = np.polymul(np.polymul(D[0], D[1]), D[2])
    den = np.polymul(alpha, prodD)
    for j, gj in enumerate(p.g):
        others = [D[k] for k in range(3) if k != j]
        den = np.polyadd(den, gj**2 * np.polymul(others[0], others[1]))
    num = np.polysub(2 * p.radiative_rate * prodD, den)

    zr = polyroots(num)
    pr = polyroots(den)
    tol = cancel_rtol * p.omega_c
    keep_z = list(zr)
    keep_p = list(pr)
    cancelled: list[complex] = []
    # greedily cancel the closest pair first
    while keep_z and keep_p:
        dist = np.abs(np.subtract.outer(np.array(keep_z), np.array(keep_p)))
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        if dist[i, j] > tol:
            break
        cancelled.append(complex(0.5 * (keep_z[i] + keep_p[j])) + center)
        keep_z.pop(i)
        keep_p.pop(j)
    if cancelled:
        num_r = _poly_from_roots(num[0], keep_z)
        den_r = _poly_from_roots(den[0], keep_p)
    else:
        num_r, den_r = num.copy(), den.copy()
    return RationalReflection(
        center=center,
        num_full=num,
        den_full=den,
        num=num_r,
        den=den_r,
        cancel_tol=tol,
        cancelled=tuple(cancelled),
        params=p,
    )


# --------------------------------------------------------------------------- features


@dataclass(frozen=True)
class SpectralFeature:
    """A pole or zero of a reflection coefficient.

    ``dominant`` is ``1..3`` for a qubit-dominated feature, ``"resonator"``,
    ``"mixed"`` for symmetry-degenerate modes, or ``None`` before labeling.
    ``participation`` lists normalized weights of (resonator/bus, q1, q2, q3).
    """

    kind: Kind
    location: ComplexFreq
    dominant: int | str | None = None
    participation: tuple[float, ...] = ()
    units: str = "rad/ns"

    @property
    def omega(self) -> complex:
        return self.location.value

    @property
    def dominant_qubit(self) -> int | None:
        return self.dominant if isinstance(self.dominant, int) else None

    def to_record(self) -> dict:
        """JSON-ready record in Hz and rad/ns."""
        if self.units == "rad/ns":
            to_hz, to_rad_ns = 1e9 / (2 * math.pi), 1.0
        elif self.units == "rad/s":
            to_hz, to_rad_ns = 1 / (2 * math.pi), 1e-9
        else:
            raise ValueError(f"unknown units {self.units!r}")
        return {
            "kind": self.kind,
            "re_Hz": self.location.re * to_hz,
            "im_Hz": self.location.im * to_hz,
            "re_rad_ns": self.location.re * to_rad_ns,
            "im_rad_ns": self.location.im * to_rad_ns,
            "dominant_qubit": self.dominant,
            "participation": list(self.participation),
        }


def find_features(rr: RationalReflection, kind: Kind, verify_tol: float = 1e-8) -> list[SpectralFeature]:
    """All poles or zeros of ``rr``, sorted by real part.

    Zeros are checked against the unreduced rational: ``|r| < verify_tol``.
    """
    roots = rr.roots(kind)
    if kind == "zero":
        vals = np.abs(rr(roots))
        bad = vals >= verify_tol
        if np.any(bad):
            raise RootFindingError(
                f"{int(bad.sum())} zero(s) fail |r| < {verify_tol:g} (max {vals.max():.3e})",
                roots,
                vals,
            )
    roots = roots[np.argsort(roots.real, kind="stable")]
    return [SpectralFeature(kind, ComplexFreq.from_complex(z)) for z in roots]


def null_vector(m: np.ndarray) -> tuple[np.ndarray, bool]:
    """Right null vector of ``m`` via SVD, and whether the null space is degenerate."""
    _, s, vh = np.linalg.svd(m)
    degenerate = bool(s[-2] - s[-1] <= DEGENERACY_RTOL * s[0])
    return vh[-1].conj(), degenerate


def classify_participation(
    weights: np.ndarray, degenerate: bool, tie_rtol: float = 1e-6, first_label: str = "resonator"
):
    """Map participation weights to a label; the first entry is the non-qubit mode."""
    if degenerate:
        return "mixed"
    q = weights[1:]
    order = np.argsort(q)[::-1]
    if weights[0] >= q[order[0]]:
        return first_label
    if q[order[0]] - q[order[1]] <= tie_rtol * q[order[0]]:
        return "mixed"
    return int(order[0]) + 1


def label_features(features: Iterable[SpectralFeature], p: BlochParams) -> list[SpectralFeature]:
    """Attach participation weights and a dominant-mode label.

    Poles use the null vector of ``M``; zeros use the null vector of the
    reversed-damping matrix, whose kernel is the mode that absorbs the drive.
    Weights are ``|v_k|^2 / sum |v|^2`` (energy fractions).
    """
    sys_ = LinearSystem(p)
    out = []
    for f in features:
        m = sys_.matrix(f.omega) if f.kind == "pole" else sys_.zero_matrix(f.omega)
        v, degenerate = null_vector(m)
        w = np.abs(v) ** 2
        w = w / w.sum()
        out.append(
            SpectralFeature(f.kind, f.location, classify_participation(w, degenerate), tuple(float(x) for x in w), f.units)
        )
    return out


def features(p: BlochParams, kind: Kind) -> list[SpectralFeature]:
    """Convenience: build, find and label in one call."""
    return label_features(find_features(build_rational(p), kind), p)


# --------------------------------------------------------------------------- heatmap


@dataclass(frozen=True)
class HeatmapGrid:
    """``|r|`` on a grid; rows follow ``im_samples``, columns ``re_samples``.

    ``im_samples`` are decay components: the grid point is ``re - 1j*im``.
    ``pole_mask`` marks cells replaced by :data:`SENTINEL`.
    """

    re_samples: np.ndarray
    im_samples: np.ndarray
    values: np.ndarray
    pole_mask: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.im_samples), len(self.re_samples)):
            raise ValueError("grid dimensions inconsistent")

    def minima(self) -> list[tuple[int, int]]:
        """Indices of strict local minima (8-neighbourhood), interior and edge cells."""
        v = self.values
        pad = np.pad(v, 1, constant_values=np.inf)
        out = []
        for i in range(v.shape[0]):
            for j in range(v.shape[1]):
                nb = pad[i : i + 3, j : j + 3].copy()
                nb[1, 1] = np.inf
                if v[i, j] < nb.min():
                    out.append((i, j))
        return out

    def to_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            fh.write("im\\re," + ",".join(repr(float(x)) for x in self.re_samples) + "\n")
            for im, row in zip(self.im_samples, self.values):
                fh.write(repr(float(im)) + "," + ",".join(repr(float(x)) for x in row) + "\n")


def grid_heatmap(
    evaluate: Callable[[np.ndarray], np.ndarray],
    poles: np.ndarray,
    guard: float,
    window: tuple[float, float, float, float],
    n_re: int,
    n_im: int,
    jobs: int = 1,
) -> HeatmapGrid:
    """Shared grid driver. ``evaluate`` maps a 1-D array of complex w to r(w)."""
    if n_re < 2 or n_im < 2:
        raise ValueError("heatmap needs n_re, n_im >= 2")
    re_min, re_max, im_min, im_max = window
    re = np.linspace(re_min, re_max, n_re)
    im = np.linspace(im_min, im_max, n_im)

    def row(i: int) -> tuple[np.ndarray, np.ndarray]:
        w = re - 1j * im[i]
        near = np.min(np.abs(w[:, None] - poles[None, :]), axis=1) <= guard if poles.size else np.zeros(n_re, bool)
        vals = np.full(n_re, SENTINEL)
        if np.any(~near):
            vals[~near] = np.abs(evaluate(w[~near]))
        return vals, near

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(row, range(n_im)))
    else:
        rows = [row(i) for i in range(n_im)]
    values = np.array([r[0] for r in rows])
    mask = np.array([r[1] for r in rows])
    big = ~np.isfinite(values) | (values > SENTINEL)
    values[big] = SENTINEL
    return HeatmapGrid(re, im, values, mask | big)


def heatmap(
    p: BlochParams,
    window: tuple[float, float, float, float],
    n_re: int,
    n_im: int,
    evaluate: Callable[[np.ndarray], np.ndarray] | None = None,
    jobs: int = 1,
) -> HeatmapGrid:
    """``|r|`` over ``re in [re_min, re_max]``, ``im in [im_min, im_max]`` (rad/ns)."""
    if evaluate is None:
        def evaluate(w):
            return reflection_array(p, w, guard=False)
    poles = LinearSystem(p).poles()
    return grid_heatmap(evaluate, poles, POLE_GUARD_RTOL * p.omega_c, window, n_re, n_im, jobs)
