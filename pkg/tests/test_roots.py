import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfzero.roots import (
    RootFindingError,
    aberth_batch,
    companion_roots,
    match_roots,
    newton_polish,
    polyroots,
    trim_leading,
)


def test_known_roots():
    r = polyroots([1, -6, 11, -6])
    assert r == pytest.approx([1, 2, 3])


def test_sorted_by_real_part():
    r = polyroots(np.poly([3 + 1j, -2, 0.5 - 4j, 1]))
    assert np.all(np.diff(r.real) >= 0)


def test_leading_zeros_trimmed():
    assert trim_leading([0, 0, 1, 2]).tolist() == [1, 2]
    assert polyroots([0, 0, 1, -2]) == pytest.approx([2])


def test_zero_polynomial_rejected():
    with pytest.raises(ValueError):
        polyroots([0, 0])


def test_companion_oracle_quartics():
    rng = np.random.default_rng(1)
    c = rng.standard_normal((500, 5)) + 1j * rng.standard_normal((500, 5))
    roots = aberth_batch(c)
    for ci, ri in zip(c, roots):
        ref = companion_roots(ci)
        assert np.allclose(match_roots(ref, ri), ref, rtol=1e-8, atol=0)


def test_double_root_is_found():
    r = polyroots(np.poly([1.0, 1.0, -2.0]))
    assert match_roots(np.array([-2, 1, 1]), r) == pytest.approx([-2, 1, 1], abs=1e-6)


def test_clustered_roots_like_the_reflection_polynomial():
    # four roots spread by 1% around 36 with small imaginary parts
    true = np.array([36.07 + 0.84j, 36.32 + 0.09j, 36.69 + 0.11j, 37.02 + 0.13j])
    # expanded about the origin the coefficients lose ~8 digits to cancellation
    r = polyroots(np.poly(true))
    assert np.max(np.abs(match_roots(true, r) - true)) < 1e-7
    # expanded about the cluster center the roots are accurate to rounding
    center = 36.5
    r = polyroots(np.poly(true - center)) + center
    assert np.max(np.abs(match_roots(true, r) - true)) < 1e-12


def test_newton_polish_improves():
    c = np.poly([1.0, 2.0, 3.0]).astype(complex)
    rough = np.array([1.001, 1.999, 3.002], dtype=complex)
    pol = newton_polish(c, rough)
    assert np.max(np.abs(pol - [1, 2, 3])) < 1e-6


def test_non_convergence_reports_iterate():
    with pytest.raises(RootFindingError) as info:
        aberth_batch(np.array([[1.0, 0, 0, 0, -1]]), max_iter=1, polish=False, tol=0.0)
    assert info.value.roots.shape == (1, 4)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), min_size=1, max_size=6))
def test_roots_reproduce_polynomial(true):
    true = np.array(true)
    # well separated roots only; clustered inputs are conditioning-limited
    if true.size > 1 and np.min(np.abs(np.subtract.outer(true, true))[~np.eye(true.size, dtype=bool)]) < 1e-2:
        return
    r = polyroots(np.poly(true))
    scale = max(1.0, np.max(np.abs(true)))
    assert np.max(np.abs(match_roots(true, r) - true)) < 1e-6 * scale
