import numpy as np
import pytest

from wallflow import ale, fluid, shell
from wallflow.errors import WallContact


@pytest.fixture
def meshes():
    return shell.ShellMesh(4, 2.0), fluid.FluidMesh(4, 2, 2.0)


def test_flat_wall_snapshot(meshes):
    sm, fm = meshes
    snap = ale.build_snapshot(sm, sm.zero_free(), fm, radius=0.75)
    assert np.all(snap.jac_q == 0.75)
    assert np.all(snap.eta_q == 0.0)
    assert snap.min_radius == 0.75


def test_bump_profile_min_radius_at_the_ends(meshes):
    sm, fm = meshes
    length = sm.length

    def bump(z):
        s = z / length
        return 16.0 * s**2 * (1 - s)**2

    def dbump(z):
        s = z / length
        return 32.0 * s * (1 - s) * (1 - 2 * s) / length

    eta = sm.to_free(0.01 * sm.interpolate(bump, dbump))
    snap = ale.build_snapshot(sm, eta, fm, radius=0.5)
    assert snap.min_radius == pytest.approx(0.5, abs=1e-15)
    assert snap.min_radius_z in (0.0, length)
    # Jacobian weight is radius + eta at every sampled point
    assert np.array_equal(snap.jac_q, 0.5 + snap.eta_q)


def test_collapsed_wall_raises_contact(meshes):
    sm, fm = meshes
    full = np.zeros(2 * sm.n_nodes)
    full[2:-2:2] = -0.5        # interior nodal values at -R
    with pytest.raises(WallContact):
        ale.build_snapshot(sm, sm.to_free(full), fm, radius=0.5,
                           contact_threshold=1e-6 * 0.5)


def test_identity_collapse_of_transformed_gradient():
    point = (0.0, 1.0, 0.3)    # deta, jac = R + eta = 1, r
    ref = np.array([[0.2, -0.4], [1.1, 0.7]])
    out = ale.transformed_gradient(point, ref)
    assert np.array_equal(out, ref)


def test_constant_offset_scales_only_radial_derivatives():
    c, radius = 0.3, 1.2
    point = (0.0, radius + c, 0.5)
    ref = np.array([[0.2, -0.4], [1.1, 0.7]])
    out = ale.transformed_gradient(point, ref)
    assert np.allclose(out[:, 0], ref[:, 0], rtol=0, atol=0)
    assert np.allclose(out[:, 1], ref[:, 1] / (radius + c), rtol=1e-15)


def test_affine_field_hand_value():
    # u = (r, 0) with a flat wall and R = 2: the only nonzero entry is the
    # radial derivative of the axial component, scaled to 1/2
    point = (0.0, 2.0, 0.7)
    ref = np.array([[0.0, 1.0], [0.0, 0.0]])
    out = ale.transformed_gradient(point, ref)
    assert out[0, 1] == pytest.approx(0.5, rel=1e-15)
    assert out[0, 0] == out[1, 0] == out[1, 1] == 0.0


def test_divergence_examples():
    # u = (z, -r), flat wall, R = 1: exact cancellation
    point = (0.0, 1.0, 0.4)
    ref = np.array([[1.0, 0.0], [0.0, -1.0]])
    assert ale.transformed_divergence(point, ref) == 0.0
    # u = (0, r) with eta = c: divergence is 1 / (R + c)
    c, radius = 0.25, 1.0
    point = (0.0, radius + c, 0.4)
    ref = np.array([[0.0, 0.0], [0.0, 1.0]])
    assert ale.transformed_divergence(point, ref) == pytest.approx(
        1.0 / (radius + c), rel=1e-15)


def test_divergence_is_trace_of_gradient():
    rng = np.random.default_rng(2)
    for _ in range(10):
        point = (rng.standard_normal(), 0.5 + rng.random(), rng.random())
        ref = rng.standard_normal((2, 2))
        g = ale.transformed_gradient(point, ref)
        assert ale.transformed_divergence(point, ref) == pytest.approx(
            g[0, 0] + g[1, 1], rel=1e-14)


def test_symmetrized_gradient_examples():
    point = (0.0, 2.0, 0.7)
    ref = np.array([[0.0, 1.0], [0.0, 0.0]])
    d = ale.symmetrized_transformed_gradient(point, ref)
    assert d[0, 1] == d[1, 0] == pytest.approx(0.25, rel=1e-15)
    assert d[0, 0] == d[1, 1] == 0.0
    rng = np.random.default_rng(4)
    point = (rng.standard_normal(), 1.7, 0.3)
    ref = rng.standard_normal((2, 2))
    d = ale.symmetrized_transformed_gradient(point, ref)
    assert np.array_equal(d, d.T)


def test_map_jacobian_determinant_is_the_weight(meshes):
    sm, fm = meshes
    rng = np.random.default_rng(6)
    eta = 0.05 * rng.standard_normal(sm.n_free)
    snap = ale.build_snapshot(sm, eta, fm, radius=0.8)
    # determinant of [[1, 0], [r deta, R + eta]] at a few sampled points
    for c, q in [(0, 0), (3, 4), (7, 8)]:
        grad_map = np.array([[1.0, 0.0],
                             [snap.r_q[c, q] * snap.deta_q[c, q],
                              snap.jac_q[c, q]]])
        det = np.linalg.det(grad_map)
        assert det == pytest.approx(snap.jac_q[c, q], rel=1e-14)


def test_physical_map_and_domain_velocity(meshes):
    sm, fm = meshes
    eta = sm.zero_free()
    z, r = ale.map_to_physical(sm, eta, 0.5, np.array([1.0]), np.array([0.5]))
    assert r[0] == pytest.approx(0.25, rel=1e-15)
    w = ale.DomainVelocityField(v_half_q=np.array([2.0]), r_q=np.array([0.5]))
    assert w.w_r[0] == 1.0


def test_pullback_samples_the_deformed_geometry(meshes):
    sm, fm = meshes
    full = np.zeros(2 * sm.n_nodes)
    full[2:-2:2] = 0.2
    eta = sm.to_free(full)
    u = ale.pullback_velocity(sm, eta, 0.5, fm,
                              fz=lambda z, r: r, fr=lambda z, r: 0.0 * z)
    # at an interior top node the physical ordinate is R + 0.2
    node = fm.top_nodes[fm.n_cols // 2]
    assert u[node] == pytest.approx(0.7, rel=1e-12)
    assert np.all(u[fm.n_velocity_nodes:] == 0.0)


def test_snapshot_audit_matches_source(meshes):
    sm, fm = meshes
    rng = np.random.default_rng(8)
    eta = 0.01 * rng.standard_normal(sm.n_free)
    snap = ale.build_snapshot(sm, eta, fm, radius=0.5)
    assert snap.matches(sm, eta, fm)
    assert not snap.matches(sm, eta * 1.001, fm)
