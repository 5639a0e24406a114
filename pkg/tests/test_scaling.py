import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhtrap.errors import DomainError, PreconditionError
from nhtrap.scaling import (
    Box,
    assemble_deformed,
    build_profile,
    eigen_solve,
    eigenpair_residual,
    extract_resonances,
    filter_resonances,
    profile_values,
    resolvent_norm,
    richardson,
    smallest_singular_value,
    smoothstep,
    stack_resolvent_norm,
)
from nhtrap.warped import poschl_teller_oracle


def sech2(V0):
    return lambda z: V0 / np.cosh(z) ** 2


# ---- profile -----------------------------------------------------------------------

def test_smoothstep_endpoints():
    assert smoothstep(0.0) == 0.0 and smoothstep(1.0) == 1.0
    assert smoothstep(0.5) == pytest.approx(0.5)


def test_profile_regions():
    r = np.array([-5.0, -2.5, 0.0, 0.5, 1.5, 2.0, 3.0])
    f, fp, fpp = profile_values(r, 0.5, 1.0)
    tan = math.tan(0.5)
    # undeformed inside R, the straight ray r tan(theta) beyond 2R
    assert np.all(f[2:4] == 0.0)
    assert f[-1] == pytest.approx(3.0 * tan) and f[0] == pytest.approx(-5.0 * tan)
    assert fp[-1] == pytest.approx(tan) and fpp[-1] == pytest.approx(0.0, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(r=st.floats(1.01, 1.99))
def test_profile_derivatives_match_differences(r):
    step = 1e-6
    f, fp, fpp = profile_values(np.array([r - step, r, r + step]), 0.5, 1.0)
    assert fp[1] == pytest.approx((f[2] - f[0]) / (2 * step), rel=1e-6, abs=1e-8)
    assert fpp[1] == pytest.approx((fp[2] - fp[0]) / (2 * step), rel=1e-5, abs=1e-6)


def test_profile_is_odd_and_grid_symmetric():
    prof = build_profile(0.5, 1.0, 4.0, 401)
    assert np.array_equal(prof.grid, -prof.grid[::-1])
    assert np.array_equal(prof.f, -prof.f[::-1])
    assert prof.spacing == pytest.approx(8.0 / 402)


@pytest.mark.parametrize("kw", [dict(theta=0.0), dict(theta=1.6), dict(R=0.0), dict(grid_max=2.0), dict(N=100)])
def test_profile_preconditions(kw):
    args = dict(theta=0.5, R=1.0, grid_max=4.0, N=400)
    args.update(kw)
    with pytest.raises(DomainError):
        build_profile(**args)


# ---- operator and eigenvalues --------------------------------------------------------

def test_free_operator_matches_discrete_sine_spectrum():
    N, h, gm = 300, 0.1, 4.0
    prof = build_profile(0.0, 1.0, gm, N, allow_zero_theta=True)
    op = assemble_deformed(prof, lambda r: 0.0 * r, h)
    dr = prof.spacing
    k = np.arange(1, N + 1)
    exact = (2 * h / dr * np.sin(k * math.pi / (2 * (N + 1)))) ** 2
    vals = np.sort(eigen_solve(op, residuals=False).values.real)
    assert np.allclose(vals, exact, rtol=1e-10, atol=1e-12)


def test_scaling_rotates_the_continuum():
    prof = build_profile(0.5, 1.0, 4.0, 400)
    op = assemble_deformed(prof, lambda z: 0.0 * z, 0.1, continuation=True)
    vals = eigen_solve(op, residuals=False).values
    assert np.all(vals.imag <= 1e-8 * np.abs(vals))
    # resolved low-energy modes cluster on the ray arg E = -2 theta
    low = vals[(np.abs(vals) > 1e-2) & (np.abs(vals) < 2.0)]
    assert len(low) > 20
    assert np.median(np.angle(low)) == pytest.approx(-2 * 0.5, abs=0.02)


def test_parity_split_matches_dense():
    for N in (301, 300):
        prof = build_profile(0.5, 1.0, 4.0, N)
        op = assemble_deformed(prof, sech2(1.0), 0.1, continuation=True)
        assert op.even
        split = np.sort_complex(eigen_solve(op, residuals=False).values)
        dense = np.sort_complex(np.linalg.eigvals(op.matrix))
        assert np.allclose(split, dense, atol=1e-9)


def test_residuals_are_small():
    prof = build_profile(0.5, 1.0, 4.0, 400)
    op = assemble_deformed(prof, sech2(1.0), 0.1, continuation=True)
    res = eigen_solve(op)
    assert np.nanmax(res.residuals) <= 1e-8 * op.frobenius_norm


def test_support_check_without_continuation():
    prof = build_profile(0.5, 1.0, 4.0, 400)
    with pytest.raises(PreconditionError):
        assemble_deformed(prof, sech2(1.0), 0.1)
    with pytest.raises(DomainError):
        assemble_deformed(prof, sech2(1.0), -0.1, continuation=True)


def test_eigenpair_residual_vector_is_eigenvector():
    prof = build_profile(0.5, 1.0, 4.0, 400)
    op = assemble_deformed(prof, sech2(1.0), 0.1, continuation=True)
    lam = poschl_teller_oracle(1.0, 0.1, 0, both_signs=False)[0] ** 2
    vals = eigen_solve(op, residuals=False).values
    lam = vals[np.argmin(np.abs(vals - lam))]
    r, v = eigenpair_residual(op, lam)
    assert r <= 1e-8 * op.frobenius_norm and np.linalg.norm(v) == pytest.approx(1.0)


# ---- resonances --------------------------------------------------------------------

@pytest.fixture(scope="module")
def pt_pair():
    ops = [assemble_deformed(build_profile(th, 0.6, 4.0, 1000), sech2(1.0), 0.1, continuation=True)
           for th in (0.5, 0.65)]
    return ops


def test_extract_matches_oracle(pt_pair):
    res = extract_resonances(pt_pair, (0.5, 1.5, -0.32, 0.0))
    oracle = poschl_teller_oracle(1.0, 0.1, 2, both_signs=False)
    assert len(res) == 3
    got = np.array(sorted((r.omega for r in res), key=lambda w: -w.imag))
    # second-order scheme: the raw error is a small multiple of dr^2
    dr = pt_pair[0].profile.spacing
    assert np.max(np.abs(got - oracle)) <= 2 * dr ** 2
    assert res.diagnostics["separation_ok"]
    assert all(r.residual <= 1e-8 * pt_pair[0].frobenius_norm for r in res)


def test_extract_requires_angle_gap(pt_pair):
    with pytest.raises(PreconditionError):
        extract_resonances((pt_pair[0], pt_pair[0]), (0.5, 1.5, -0.32, 0.0))


def test_filter_drops_unstable_values():
    stable = np.array([(1.0 - 0.05j) ** 2])
    moved = np.array([(1.2 - 0.3j) ** 2])
    out = filter_resonances(np.concatenate((stable, moved)), np.concatenate((stable, moved * 1.1)),
                            (0.5, 1.5, -0.5, 0.0), 0.5)
    assert [r.omega for r in out] == pytest.approx([1.0 - 0.05j])


def test_filter_clusters_multiplicity():
    w = 1.0 - 0.05j
    vals = np.array([w ** 2, (w + 1e-9) ** 2])
    out = filter_resonances(vals, vals, (0.5, 1.5, -0.5, 0.0), 0.5, multiplicity=2)
    assert len(out) == 1 and out[0].multiplicity == 4


def test_box():
    b = Box(0.0, 1.0, -1.0, 0.0)
    assert b.contains(0.5 - 0.5j) and not b.contains(1.5 - 0.5j)
    assert b.covers(Box(0.1, 0.9, -0.5, 0.0)) and not b.covers(Box(-0.1, 0.9, -0.5, 0.0))
    with pytest.raises(PreconditionError):
        Box(1.0, 0.0, 0.0, 1.0)


def test_richardson_removes_quadratic_term():
    exact, c = 2.0 + 1.0j, 3.0
    a = exact + c * 0.1 ** 2
    b = exact + c * 0.05 ** 2
    assert richardson(a, b, 0.1, 0.05) == pytest.approx(exact)


# ---- resolvent ---------------------------------------------------------------------

def test_resolvent_norm_matches_dense_svd():
    prof = build_profile(0.5, 1.0, 4.0, 240)
    op = assemble_deformed(prof, sech2(1.0), 0.1, continuation=True)
    w = 1.0 - 0.025j
    A = op.matrix - w * w * np.eye(op.size)
    smin = np.linalg.svd(A, compute_uv=False)[-1]
    assert resolvent_norm(op, w) == pytest.approx(1.0 / smin, rel=1e-5)
    assert stack_resolvent_norm([op, op], w) == pytest.approx(1.0 / smin, rel=1e-5)


def test_smallest_singular_value_diagonal():
    d = np.array([3.0, 2.0, 0.5, 4.0], complex)
    z = np.zeros(3, complex)
    s, v = smallest_singular_value(d, z, z)
    assert s == pytest.approx(0.5)


def test_resolvent_at_eigenvalue_raises():
    d = np.array([1.0, 2.0, 3.0], complex)
    z = np.zeros(2, complex)
    s, _ = smallest_singular_value(d - 2.0, z, z)
    assert s == 0.0
