import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unduloid import calculus, spectrum
from unduloid.errors import BranchLossError, DegenerateCriticalPointError, GridTooCoarseError
from unduloid.family import SlabConfig, profile_samples, v_t_numeric
from unduloid.spectrum import (
    assemble_operator,
    cylinder_eigenvalues,
    eigen_spectrum,
    eigenvalue_slope_at_critical,
    form_spectrum,
    operator_at,
    rayleigh_quotient,
    track_eigenvalue,
)

PI2 = math.pi**2


@pytest.fixture(scope="module")
def critical8():
    pts = calculus.find_critical_points(SlabConfig(8))
    return [p for p in pts if p.interior]


def test_grid_too_coarse(cfg8):
    with pytest.raises(GridTooCoarseError):
        assemble_operator(profile_samples(0.5, cfg8, N=64), cfg8)


def test_config_mismatch(cfg8):
    with pytest.raises(ValueError):
        assemble_operator(profile_samples(0.5, cfg8, N=128), SlabConfig(8, 2.0))


@pytest.mark.parametrize("t", [0.05, 0.5, 1.0, 4.0])
def test_coefficients_positive(t, cfg8):
    op = operator_at(t, cfg8, N=256)
    assert np.all(op.p > 0) and np.all(op.weight_m > 0)
    assert np.all(op.q0 < 0)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([2, 3, 8, 11]), st.floats(0.05, 0.99), st.integers(0, 2**32 - 1))
def test_self_adjoint(n, t, seed):
    op = operator_at(t, SlabConfig(n), N=256)
    rng = np.random.default_rng(seed)
    w, phi = rng.standard_normal((2, op.N + 1))
    lhs = op.inner_m(op.apply_dh(w), phi)
    rhs = op.inner_m(w, op.apply_dh(phi))
    scale = op.norm_m(op.apply_dh(w)) * op.norm_m(phi) + op.norm_m(w) * op.norm_m(op.apply_dh(phi))
    assert abs(lhs - rhs) <= 1e-12 * scale
    w, phi = op.project(w), op.project(phi)
    lhs = op.inner_m(op.apply_a(w), phi)
    rhs = op.inner_m(w, op.apply_a(phi))
    assert abs(lhs - rhs) <= 1e-10 * op.norm_m(w) * op.norm_m(phi) * np.max(np.abs(op.diag / op.weight_m))


def test_constant_function_mean(cfg8):
    op = operator_at(0.4, cfg8, N=256)
    a1 = op.apply_a(np.ones(op.N + 1))
    assert abs(op.mean_m(a1)) <= 1e-12 * np.max(np.abs(op.apply_dh(np.ones(op.N + 1))))


def test_cylinder_operator(cfg8):
    op = operator_at(1.0, cfg8, N=256)
    for k in (1, 2, 5):
        w = np.cos(k * math.pi * op.grid)
        lam = cylinder_eigenvalues(k, op.N)[-1]
        np.testing.assert_allclose(op.apply_dh(w), lam * w, atol=1e-8 * abs(lam) + 1e-9)
    assert cylinder_eigenvalues(3, 2048)[0] == pytest.approx(0.0, abs=1e-5)


def test_linearised_curvature_of_v_t(cfg8):
    op = operator_at(0.6, cfg8, N=2048)
    vt, _ = v_t_numeric(op.grid, 0.6, cfg8)
    eta1, _ = calculus.eta_derivative(0.6, cfg8)
    assert np.max(np.abs(op.apply_dh(vt) - eta1)) <= 1e-3 * abs(eta1)


def test_cylinder_spectrum_exact_discrete(cfg8):
    op = operator_at(1.0, cfg8, N=512)
    res = eigen_spectrum(op, 5)
    np.testing.assert_allclose(res.eigenvalues, cylinder_eigenvalues(5, 512), atol=1e-7, rtol=1e-10)
    for k, w in enumerate(res.eigenfunctions, start=1):
        shape = np.cos(k * math.pi * op.grid)
        shape /= op.norm_m(shape)
        assert abs(op.inner_m(shape, w)) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("d", [0.5, 2.0])
def test_cylinder_spectrum_scales_with_width(d):
    res = eigen_spectrum(operator_at(1.0, SlabConfig(8, d), N=512), 3)
    np.testing.assert_allclose(res.eigenvalues, cylinder_eigenvalues(3, 512, d), rtol=1e-9, atol=1e-7 / d**2)


def test_cylinder_convergence_order(cfg8):
    exact = np.array([0.0, 3.0, 8.0]) * PI2
    errs = [np.abs(eigen_spectrum(operator_at(1.0, cfg8, N=N), 3).eigenvalues - exact)[1:]
            for N in (256, 512)]
    order = np.log2(errs[0] / errs[1])
    assert np.all(order >= 1.8)


@pytest.mark.parametrize("n,t", [(8, 0.3), (3, 0.7), (11, 0.2), (8, 2.5)])
def test_spectrum_invariants(n, t):
    op = operator_at(t, SlabConfig(n), N=512)
    res = eigen_spectrum(op, 4)
    assert np.all(np.diff(res.eigenvalues) >= 0)
    assert np.all(res.residuals <= 1e-6)
    for w in res.eigenfunctions:
        assert op.norm_m(w) == pytest.approx(1.0, rel=1e-12)
        assert abs(np.sum(w * op.weight_m)) <= 1e-10 * op.norm_m(w) * math.sqrt(op.weight_m.sum())
    gram = res.eigenfunctions @ (op.weight_m[:, None] * res.eigenfunctions.T)
    np.testing.assert_allclose(gram, np.eye(4), atol=1e-10)


@settings(max_examples=15, deadline=None)
@given(st.sampled_from([2, 3, 8, 11]), st.floats(0.02, 0.99))
def test_spectral_lower_bound(n, t):
    op = operator_at(t, SlabConfig(n), N=256)
    res = eigen_spectrum(op, 2)
    v = profile_samples(t, SlabConfig(n), N=256).v
    assert res.eigenvalues[0] >= -(n - 1) / np.min(v) ** 2 - 1e-2 * PI2


@pytest.mark.parametrize("k", [0, 65, 2.5])
def test_mode_count_validation(k, cfg8):
    op = operator_at(0.5, cfg8, N=256)
    with pytest.raises(ValueError):
        eigen_spectrum(op, k)


def test_near_cylinder_morse_index(cfg8, cfg11):
    assert eigen_spectrum(operator_at(0.95, cfg8), 4).negative_count == 1
    assert eigen_spectrum(operator_at(0.95, cfg11), 4).negative_count == 0


@pytest.mark.parametrize("n,t", [(8, 0.2), (8, 0.4), (8, 0.8), (3, 0.5), (11, 0.6), (2, 0.3)])
def test_form_spectrum_has_same_signs(n, t):
    op = operator_at(t, SlabConfig(n), N=512)
    res = eigen_spectrum(op, 4)
    form = form_spectrum(op, 4)
    np.testing.assert_array_equal(np.sign(form), np.sign(res.eigenvalues))
    for lam, w in zip(res.eigenvalues, res.eigenfunctions):
        assert np.sign(rayleigh_quotient(op, w)) == np.sign(lam)


def test_null_space_at_critical_points(critical8, cfg8):
    for cp in critical8:
        _, op, vt = spectrum.slope_denominator(cp.t0, cfg8, N=1024)
        res = eigen_spectrum(op, 3)
        j = int(np.argmin(np.abs(res.eigenvalues)))
        assert abs(res.eigenvalues[j]) <= 1e-3 * PI2
        u = vt / op.norm_m(vt)
        u *= np.sign(op.inner_m(u, res.eigenfunctions[j]))
        assert op.norm_m(u - res.eigenfunctions[j]) <= 1e-2


@pytest.mark.parametrize("n,lo,hi", [(8, None, 0), (8, 0, 1), (8, 1, 2)])
def test_morse_index_constant_between_critical_points(n, lo, hi, critical8):
    cuts = [0.01] + sorted(p.t0 for p in critical8) + [0.99]
    a, b = cuts[0 if lo is None else lo + 1], cuts[hi + 1]
    ts = np.linspace(a, b, 12)[1:-1]
    counts = {eigen_spectrum(operator_at(t, SlabConfig(n), N=512), 3).negative_count for t in ts}
    assert len(counts) == 1


def test_track_validation(cfg8):
    with pytest.raises(ValueError):
        track_eigenvalue(cfg8, t_range=(0.5, 0.6), steps=4, N=256)
    with pytest.raises(ValueError):
        track_eigenvalue(cfg8, t_range=(0.5, 0.5), steps=8, N=256)


def test_track_to_cylinder(cfg8):
    branch = track_eigenvalue(cfg8, t_range=(0.9, 1.0), steps=8, mode_index=0, N=512)
    assert branch.t[-1] == 1.0
    # discrete zero mode: 4 N^2 sin^2(pi / 2N) - pi^2 ~ -pi^4 / (12 N^2)
    assert abs(branch.eigenvalues[-1]) <= PI2**2 / 512**2
    assert len(branch.pairs()) == 9


def test_track_smooth_overlaps(cfg8):
    branch = track_eigenvalue(cfg8, t_range=(0.6, 0.7), steps=64, mode_index=0, N=256)
    assert np.all(branch.overlaps >= 0.99)


def test_track_through_zero(critical8, cfg8):
    cp = max(critical8, key=lambda p: p.t0)
    lo, hi = cp.t0 - 0.01, cp.t0 + 0.01
    branch = track_eigenvalue(cfg8, t_range=(lo, hi), steps=8, mode_index=0, N=512)
    lam = branch.eigenvalues
    flips = np.nonzero(np.sign(lam[:-1]) != np.sign(lam[1:]))[0]
    assert len(flips) == 1
    i = flips[0]
    t_cross = branch.t[i] - lam[i] * (branch.t[i + 1] - branch.t[i]) / (lam[i + 1] - lam[i])
    assert t_cross == pytest.approx(cp.t0, abs=1e-3)


def test_branch_loss(monkeypatch, cfg8):
    real = spectrum.eigen_spectrum
    calls = {"n": 0}

    def scrambled(op, k):
        res = real(op, k)
        calls["n"] += 1
        if calls["n"] == 1:
            return res
        # Replace the eigenfunctions by a mode orthogonal to all of them.
        w = np.cos(20 * math.pi * op.grid)
        w = op.project(w)
        w /= op.norm_m(w)
        funcs = np.tile(w, (k, 1))
        return spectrum.SpectrumResult(res.t, res.n, res.N, res.eigenvalues, funcs, res.residuals)

    monkeypatch.setattr(spectrum, "eigen_spectrum", scrambled)
    with pytest.raises(BranchLossError) as info:
        track_eigenvalue(cfg8, t_range=(0.5, 0.6), steps=8, N=256)
    assert info.value.overlap < 0.8


def test_slope_at_cylinder(cfg8):
    formula, continuation = eigenvalue_slope_at_critical(1.0, cfg8, N=256)
    assert formula == 0.0
    assert abs(continuation) <= 1e-3


def test_slope_sign_law(critical8, cfg8):
    for cp in critical8:
        denom, _, _ = spectrum.slope_denominator(cp.t0, cfg8, N=512)
        assert denom > 0
        formula, continuation = eigenvalue_slope_at_critical(cp.t0, cfg8, N=512)
        assert np.sign(formula) == -np.sign(cp.v2) * np.sign(cp.eta1)
        assert np.sign(continuation) == np.sign(formula)


def test_slope_rejects_degenerate(critical8, cfg8):
    with pytest.raises(DegenerateCriticalPointError):
        eigenvalue_slope_at_critical(critical8[0].t0, cfg8, N=256, degenerate_ratio=1e6)
