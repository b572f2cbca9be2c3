import numpy as np
import pytest

from topolig.elasticity import LoadSpec, solve_adjoint, solve_state
from topolig.errors import InsufficientCandidates, InvalidDirection, InvalidMaterial, NotInDomain
from topolig.functionals import FunctionalSpec
from topolig.ligament import (PolarizationCoeffs, QuarticForm, Segment, contour_points, element_quartics, polarization_apply,
                              polarization_coeffs, quadrature_points, quartic_coeffs, scan_segments,
                              segment_derivative, thin_points)
from topolig.material import LameField, LevelSet, MaterialPair, ersatz_field, hooke_apply
from topolig.mesh import BoundaryTag, box_predicate, build_union, tag_boundary

from conftest import cantilever_mesh, hole_level_set

RNG = np.random.default_rng(20)


def _sym(rng):
    a = rng.normal(size=(2, 2))
    return 0.5 * (a + a.T)


def test_coefficients_zero_contrast():
    c = polarization_coeffs(1.0, 1.0, 1.0, 1.0)
    assert (c.alpha, c.beta, c.gamma, c.rho) == (0.0, 0.0, 0.0, 0.0)


def test_coefficients_mu_matched():
    c = polarization_coeffs(1.0, 1.0, 3.0, 1.0)
    assert c.alpha == pytest.approx(2 * 2 * 3 / 5, abs=1e-12)
    assert (c.beta, c.gamma, c.rho) == (0.0, 0.0, 0.0)


def test_coefficients_reference_case():
    c = polarization_coeffs(1.0, 1.0, 2.0, 2.0)
    assert abs(c.alpha - 1.0) <= 1e-12
    assert abs(c.beta - 2.0) <= 1e-12
    assert abs(c.gamma - 8.0 / 3.0) <= 1e-12
    assert abs(c.rho) <= 1e-12


def test_rho_choices_differ_by_mu_ratio():
    a = polarization_coeffs(1.0, 1.0, 4.0, 2.0, "mu0")
    b = polarization_coeffs(1.0, 1.0, 4.0, 2.0, "mu1")
    assert a.rho == pytest.approx(2.0 * b.rho, rel=1e-14)
    assert a.alpha == b.alpha and a.gamma == b.gamma


def test_invalid_rho_choice_and_material():
    with pytest.raises(ValueError):
        polarization_coeffs(1, 1, 2, 2, "mu")
    with pytest.raises(InvalidMaterial):
        polarization_coeffs(1, 1, 2, -2)


def _inside_strain(l0, m0, l1, m1, tau, e):
    """Strain inside a thin layer from the transmission conditions."""
    n = np.array([-tau[1], tau[0]])
    # unknowns: inner nn and tn strain; tt strain is continuous
    ett = tau @ e @ tau
    tn = tau @ e @ n
    nn = n @ e @ n
    # traction continuity: (A1 e_in) n = (A0 e) n, in (n, tau) components
    A = np.array([[l1 + 2 * m1, 0.0], [0.0, 2 * m1]])
    rhs = np.array([(l0 + 2 * m0) * nn + l0 * ett - l1 * ett, 2 * m0 * tn])
    enn, etn = np.linalg.solve(A, rhs)
    P = np.column_stack([tau, n])
    return P @ np.array([[ett, etn], [etn, enn]]) @ P.T


@pytest.mark.parametrize("seed", range(5))
def test_polarization_matches_thin_layer_transmission(seed):
    rng = np.random.default_rng(seed)
    l0, m0, l1, m1 = rng.uniform(0.2, 3.0, 4)
    th = rng.uniform(0, 2 * np.pi)
    tau = np.array([np.cos(th), np.sin(th)])
    e = _sym(rng)
    e_in = _inside_strain(l0, m0, l1, m1, tau, e)
    jump = hooke_apply(l1, m1, e_in) - hooke_apply(l0, m0, e_in)
    M = polarization_apply(polarization_coeffs(l0, m0, l1, m1, "mu1"), tau, e)
    # the layer has width 2 eps
    assert np.allclose(M, 2.0 * jump, atol=1e-12 * max(1.0, np.abs(M).max()))


def test_polarization_rejects_zero_direction():
    with pytest.raises(InvalidDirection):
        polarization_apply(polarization_coeffs(1, 1, 2, 2), np.zeros(2), np.eye(2))


def test_polarization_needs_unit_direction():
    with pytest.raises(InvalidDirection):
        polarization_apply(polarization_coeffs(1, 1, 2, 3), np.array([3.0, 4.0]), np.eye(2))


def test_polarization_single_terms():
    e = np.array([[0.4, 0.3], [0.3, -0.2]])
    tau = np.array([1.0, 0.0])
    assert np.allclose(polarization_apply(PolarizationCoeffs(1.5, 0, 0, 0, "mu1"), tau, np.eye(2)), 3.0 * np.eye(2))
    assert np.allclose(polarization_apply(PolarizationCoeffs(0, 0, 2.0, 0, "mu1"), tau, e), [[0.8, 0], [0, 0]])
    assert np.allclose(polarization_apply(PolarizationCoeffs(0, 0, 0, 2.0, "mu1"), tau, e), [[0, 0], [0, -0.4]])
    assert not np.any(polarization_apply(polarization_coeffs(1, 1, 2, 3), tau, np.zeros((2, 2))))


def test_quartic_consistency_random():
    for _ in range(100):
        l0, m0, l1, m1 = RNG.uniform(0.1, 5.0, 4)
        c = polarization_coeffs(l0, m0, l1, m1)
        eu, ep = _sym(RNG), _sym(RNG)
        q = quartic_coeffs(c, eu, ep)
        th = RNG.uniform(0, 2 * np.pi)
        tau = np.array([np.cos(th), np.sin(th)])
        direct = (polarization_apply(c, tau, eu) * ep).sum()
        assert abs(q(tau) - direct) <= 1e-12 * max(1.0, abs(direct))
        t = RNG.normal(size=2)
        assert abs(q(2 * t) - 16 * q(t)) <= 1e-12 * max(1.0, abs(q(t)))


def test_quartic_form_vectorized():
    q = QuarticForm(np.array([1.0, 2.0, 3.0, 4.0, 5.0]))
    tau = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    assert np.allclose(q(tau), [1.0, 5.0, 15.0])


@pytest.fixture(scope="module")
def state():
    m = cantilever_mesh(32, 16)
    phi = hole_level_set(m)
    bg = ersatz_field(phi, (1.0, 1.0), 1e-3)
    loads = LoadSpec(traction=(0.0, -1.0))
    u0 = solve_state(m, bg, loads, method="direct")
    p0 = solve_adjoint(m, bg, FunctionalSpec.compliance(), u0, loads, method="direct")
    pair = MaterialPair(bg, LameField.uniform(m, 1.0, 1.0))
    return m, phi, bg, loads, u0, p0, pair


def test_zero_contrast_exact_zero(state):
    m, phi, bg, loads, u0, p0, _ = state
    pair = MaterialPair(bg, bg)
    r = segment_derivative(Segment.line((0.6, 0.5), (1.4, 0.5)), u0, p0, pair)
    assert r.value == 0.0
    assert np.all(element_quartics(u0, p0, pair) == 0.0)


def test_bar_through_void_is_improving(state):
    m, phi, bg, loads, u0, p0, pair = state
    r = segment_derivative(Segment.line((0.7, 0.5), (1.3, 0.5)), u0, p0, pair)
    assert r.value < 0 and r.flag == "ok"


def test_additivity_at_quadrature_node(state):
    m, phi, bg, loads, u0, p0, pair = state
    step = 1.0 / 64
    whole = segment_derivative(Segment.line((0.5, 0.3), (1.5, 0.3)), u0, p0, pair, quad_step=step).value
    a = segment_derivative(Segment.line((0.5, 0.3), (1.0, 0.3)), u0, p0, pair, quad_step=step).value
    b = segment_derivative(Segment.line((1.0, 0.3), (1.5, 0.3)), u0, p0, pair, quad_step=step).value
    assert abs(whole - (a + b)) <= 1e-12 * abs(whole)


def test_polyline_equals_sum_of_pieces(state):
    m, phi, bg, loads, u0, p0, pair = state
    pts = np.array([[0.6, 0.3], [1.0, 0.7], [1.4, 0.35]])
    poly = segment_derivative(Segment(pts), u0, p0, pair).value
    parts = sum(segment_derivative(Segment(pts[k:k + 2]), u0, p0, pair).value for k in range(2))
    assert poly == pytest.approx(parts, rel=1e-12)


def test_orientation_invariance(state):
    m, phi, bg, loads, u0, p0, pair = state
    a = segment_derivative(Segment.line((0.7, 0.31), (1.33, 0.62)), u0, p0, pair).value
    b = segment_derivative(Segment.line((1.33, 0.62), (0.7, 0.31)), u0, p0, pair).value
    assert a == pytest.approx(b, rel=1e-12)


def test_outside_segment_flagged():
    m = tag_boundary(build_union([(0.5, 0.0, 1.5, 2.0), (0.0, 2.0, 2.0, 3.0)], 0.125),
                     [(box_predicate(0.5, 1.5, 0, 0), BoundaryTag.GAMMA_D),
                      (box_predicate(0, 0.25, 3, 3), BoundaryTag.GAMMA_N)])
    bg = LameField.uniform(m, 1e-3, 1e-3)
    loads = LoadSpec(traction=(0.0, -1.0))
    u0 = solve_state(m, bg, loads, method="direct")
    p0 = -u0
    pair = MaterialPair(bg, LameField.uniform(m, 1.0, 1.0))
    with pytest.raises(NotInDomain):
        segment_derivative(Segment.line((0.1, 2.9), (0.75, 0.1)), u0, p0, pair)
    reps = scan_segments([(0.1, 2.9), (0.75, 0.1), (1.0, 1.0), (1.0, 1.0)], u0, p0, pair)
    flags = [x.flag for x in reps]
    assert "outside" in flags and "degenerate" in flags
    # valid entries first, sorted by value
    k = [i for i, f in enumerate(flags) if f in ("outside", "degenerate")]
    assert min(k) == len(flags) - len(k)


def test_scan_needs_two_points(state):
    m, phi, bg, loads, u0, p0, pair = state
    with pytest.raises(InsufficientCandidates):
        scan_segments([(0.5, 0.5)], u0, p0, pair)


def test_scan_matches_segment_derivative(state):
    m, phi, bg, loads, u0, p0, pair = state
    cand = thin_points(contour_points(phi), 0.1)
    reps = scan_segments(cand, u0, p0, pair)
    assert len(reps) == len(cand) * (len(cand) - 1) // 2
    for r in reps[:10]:
        ref = segment_derivative(r.segment, u0, p0, pair).value
        assert abs(r.value - ref) <= 1e-12 * max(1.0, abs(ref))
    vals = [r.value for r in reps if r.flag in ("ok", "non_improving")]
    assert vals == sorted(vals)


def test_contour_points_on_circle(state):
    m, phi, *_ = state
    pts = contour_points(phi)
    r = np.hypot(pts[:, 0] - 1.0, pts[:, 1] - 0.5)
    assert np.abs(r - 0.25).max() < m.h ** 2
    thin = thin_points(pts, 0.1)
    d = np.hypot(*(thin[:, None] - thin[None]).transpose(2, 0, 1))
    assert d[np.triu_indices(len(thin), 1)].min() >= 0.1


def test_quadrature_points_cover_segment():
    seg = Segment(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 0.5]]))
    pts, taus, w = quadrature_points(seg, 0.1)
    assert w.sum() == pytest.approx(1.5, rel=1e-14)
    assert np.allclose(np.hypot(taus[:, 0], taus[:, 1]), 1.0)
    assert len(pts) == 15


def test_segment_validation():
    with pytest.raises(ValueError):
        Segment(np.array([[0.0, 0.0]]))
    with pytest.raises(ValueError):
        Segment(np.array([[0.0, 0.0], [0.0, 0.0]]))
