"""Geometry of the moving domain on the fixed reference rectangle.

The moving channel (0, L) x (0, R + eta(t, z)) is pulled back to the
reference domain (0, L) x (0, 1) by the vertical-stretch map
(z, r) -> (z, (R + eta(z)) r).  Everything the fluid assembly needs from
the geometry is frozen per time step in an :class:`AleSnapshot`: the wall
profile and its slope at the quadrature points, the Jacobian weight
R + eta, and the minimum radius for the contact check.

Reference-domain derivatives (d_z, d_r) of any field transform to
moving-domain derivatives via

    d1 = d_z - r * eta_z / (R + eta) * d_r,     d2 = d_r / (R + eta),

the two rows of (grad A)^{-T} applied to the reference gradient.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import WallContact


@dataclass(frozen=True)
class AleSnapshot:
    """Wall geometry sampled at the fluid quadrature points, frozen per step."""

    radius: float
    eta_q: np.ndarray        # (n_cells, n_quad) wall displacement
    deta_q: np.ndarray       # (n_cells, n_quad) wall slope d eta / d z
    jac_q: np.ndarray        # (n_cells, n_quad) Jacobian weight R + eta
    r_q: np.ndarray          # (n_cells, n_quad) reference vertical coordinate
    min_radius: float
    min_radius_z: float
    eta_source: np.ndarray = field(repr=False, default=None)

    def matches(self, shell_mesh, eta_free, fluid_mesh):
        """Audit hook: True when this snapshot was built from ``eta_free``."""
        probe = build_snapshot(shell_mesh, eta_free, fluid_mesh, self.radius,
                               contact_threshold=None)
        return (np.array_equal(probe.eta_q, self.eta_q)
                and np.array_equal(probe.deta_q, self.deta_q))


def min_radius_of(shell_mesh, eta_free, radius):
    """min(R + eta) over mesh nodes and quadrature points, with its location."""
    zs = np.concatenate([shell_mesh.nodes, shell_mesh.quad_points()])
    vals = radius + shell_mesh.evaluate(eta_free, zs)
    i = int(np.argmin(vals))
    return float(vals[i]), float(zs[i])


def build_snapshot(shell_mesh, eta_free, fluid_mesh, radius,
                   contact_threshold=None):
    """Sample the wall profile on the fluid quadrature grid.

    Raises :class:`WallContact` when the minimum radius over nodes and
    quadrature points does not exceed ``contact_threshold`` (pass ``None``
    to skip the check, e.g. for diagnostics on an already-halted run).
    """
    zq = fluid_mesh.quad_z_flat
    eta_cols = shell_mesh.evaluate(eta_free, zq)
    deta_cols = shell_mesh.evaluate(eta_free, zq, deriv=1)
    eta_q = eta_cols[fluid_mesh.quad_z_index]
    deta_q = deta_cols[fluid_mesh.quad_z_index]
    min_r, min_z = min_radius_of(shell_mesh, eta_free, radius)
    if contact_threshold is not None and min_r <= contact_threshold:
        raise WallContact(min_r, min_z)
    return AleSnapshot(
        radius=float(radius),
        eta_q=eta_q,
        deta_q=deta_q,
        jac_q=radius + eta_q,
        r_q=fluid_mesh.quad_r,
        min_radius=min_r,
        min_radius_z=min_z,
        eta_source=np.asarray(eta_free, dtype=float).copy(),
    )


@dataclass(frozen=True)
class DomainVelocityField:
    """Domain velocity w = v_half(z) * r * e_r at the quadrature points."""

    v_half_q: np.ndarray     # wall half-step velocity at quad points
    r_q: np.ndarray          # reference vertical coordinate at quad points

    @property
    def w_r(self):
        return self.v_half_q * self.r_q


def transform_scalar_gradient(deta, jac, r, d_dz, d_dr):
    """Apply the pullback to reference partials of a scalar field."""
    d1 = d_dz - r * deta / jac * d_dr
    d2 = d_dr / jac
    return d1, d2


def transformed_gradient(snapshot_point, ref_jacobian):
    """Transformed gradient of a vector field at one or many points.

    ``snapshot_point`` is a (deta, jac, r) triple (scalars or broadcastable
    arrays); ``ref_jacobian[..., i, j]`` holds the reference partial of
    component i along direction j (j = 0 for z, j = 1 for r).
    """
    deta, jac, r = snapshot_point
    ref = np.asarray(ref_jacobian, dtype=float)
    out = np.empty_like(ref)
    out[..., 0] = ref[..., 0] - np.asarray(r * deta / jac)[..., None] * ref[..., 1]
    out[..., 1] = ref[..., 1] / np.asarray(jac)[..., None]
    return out


def transformed_divergence(snapshot_point, ref_jacobian):
    """Trace of the transformed gradient (the moving-domain divergence)."""
    g = transformed_gradient(snapshot_point, ref_jacobian)
    return g[..., 0, 0] + g[..., 1, 1]


def symmetrized_transformed_gradient(snapshot_point, ref_jacobian):
    """Symmetric part of the transformed gradient (viscous strain rate)."""
    g = transformed_gradient(snapshot_point, ref_jacobian)
    return 0.5 * (g + np.swapaxes(g, -1, -2))


def map_to_physical(shell_mesh, eta_free, radius, z, r):
    """Image of reference points under the domain map (z, (R + eta(z)) r)."""
    z = np.asarray(z, dtype=float)
    r = np.asarray(r, dtype=float)
    return z, (radius + shell_mesh.evaluate(eta_free, z)) * r


def pullback_velocity(shell_mesh, eta_free, radius, fluid_mesh, fz, fr):
    """Reference-domain velocity DOFs of a physical-domain field.

    Composes the callables fz(z, r_phys), fr(z, r_phys) with the domain map,
    i.e. samples them at the image of every velocity node.  Use this to feed
    initial data given on the deformed geometry to a run; data already on
    the reference rectangle can go in directly.
    """
    zg, rg = np.meshgrid(fluid_mesh.velocity_z, fluid_mesh.velocity_r)
    _, r_phys = map_to_physical(shell_mesh, eta_free, radius,
                                zg.ravel(), rg.ravel())
    u = np.empty(2 * fluid_mesh.n_velocity_nodes)
    u[:fluid_mesh.n_velocity_nodes] = np.asarray(fz(zg.ravel(), r_phys))
    u[fluid_mesh.n_velocity_nodes:] = np.asarray(fr(zg.ravel(), r_phys))
    return u
