"""Mixed finite elements for the fluid on the reference rectangle.

Structured quadrilateral grid on (0, L) x (0, 1), biquadratic velocity and
bilinear pressure (an inf-sup stable pair).  All operators are assembled
with the same 3x3 Gauss rule and, for velocity-velocity forms, on one shared
sparsity pattern (full 2x2 component-block structure), so linear
combinations and entrywise identities between assembled matrices are exact
up to roundoff.

DOF layout: velocity component c, node n -> index c * n_velocity_nodes + n,
with nodes numbered row-major bottom-to-top (n = ir * n_cols + iz).
Essential velocity values (axial on the top edge, radial on the bottom,
inlet and outlet edges) are imposed by DOF elimination downstream; the
radial top-edge values are the coupling unknowns.
"""

import numpy as np
from numpy.polynomial.legendre import leggauss

from .sparsela import ScatterPattern

# 3x3 tensor Gauss on the unit cell
_gx, _gw = leggauss(3)
_gx = 0.5 * (_gx + 1.0)
_gw = 0.5 * _gw


def _q2_shapes(s):
    """1D quadratic Lagrange shapes at nodes {0, 1/2, 1} and derivatives."""
    s = np.asarray(s, dtype=float)
    val = np.stack([2 * s**2 - 3 * s + 1, 4 * s * (1 - s), 2 * s**2 - s], axis=-1)
    der = np.stack([4 * s - 3, 4 - 8 * s, 4 * s - 1], axis=-1)
    return val, der


def _q1_shapes(s):
    s = np.asarray(s, dtype=float)
    return np.stack([1 - s, s], axis=-1)


class FluidMesh:
    """Structured Taylor-Hood grid with precomputed shape/quadrature tables."""

    def __init__(self, n_z, n_r, length):
        if n_z < 1 or n_r < 1:
            raise ValueError("mesh needs at least one cell per direction")
        self.n_z, self.n_r = int(n_z), int(n_r)
        self.length = float(length)
        self.hz = self.length / self.n_z
        self.hr = 1.0 / self.n_r
        self.n_cols = 2 * self.n_z + 1
        self.n_rows = 2 * self.n_r + 1
        self.n_velocity_nodes = self.n_cols * self.n_rows
        self.n_pressure_nodes = (self.n_z + 1) * (self.n_r + 1)
        self.n_cells = self.n_z * self.n_r

        iz = np.arange(self.n_cols)
        ir = np.arange(self.n_rows)
        self.velocity_z = iz * (self.hz / 2.0)
        self.velocity_r = ir * (self.hr / 2.0)
        self.pressure_z = np.arange(self.n_z + 1) * self.hz
        self.pressure_r = np.arange(self.n_r + 1) * self.hr

        # cell -> node connectivity (cells row-major: c = cr * n_z + cz)
        cz = np.arange(self.n_z)
        cr = np.arange(self.n_r)
        czg, crg = np.meshgrid(cz, cr)                    # (n_r, n_z)
        czg, crg = czg.ravel(), crg.ravel()
        jz, jr = np.meshgrid(np.arange(3), np.arange(3))  # local a = jr*3 + jz
        jz, jr = jz.ravel(), jr.ravel()
        self.conn_v = ((2 * crg[:, None] + jr[None, :]) * self.n_cols
                       + 2 * czg[:, None] + jz[None, :])
        jzp, jrp = np.meshgrid(np.arange(2), np.arange(2))
        jzp, jrp = jzp.ravel(), jrp.ravel()
        self.conn_p = ((crg[:, None] + jrp[None, :]) * (self.n_z + 1)
                       + czg[:, None] + jzp[None, :])
        self._cell_cz = czg
        self._cell_cr = crg

        # quadrature: q = qr*3 + qz on the unit cell, weights sum to 1
        qz, qr = np.meshgrid(_gx, _gx)
        wz, wr = np.meshgrid(_gw, _gw)
        self.quad_s = qz.ravel()
        self.quad_t = qr.ravel()
        self.quad_w_dv = (wz * wr).ravel() * self.hz * self.hr
        self.n_quad = 9

        # shape tables at quadrature points, derivatives already global
        v_s, d_s = _q2_shapes(self.quad_s)
        v_t, d_t = _q2_shapes(self.quad_t)
        a_jz, a_jr = jz, jr
        self.phi = v_s[:, a_jz] * v_t[:, a_jr]                       # (9q, 9a)
        self.dphi_dz = d_s[:, a_jz] * v_t[:, a_jr] / self.hz
        self.dphi_dr = v_s[:, a_jz] * d_t[:, a_jr] / self.hr
        p_s = _q1_shapes(self.quad_s)
        p_t = _q1_shapes(self.quad_t)
        self.chi = p_s[:, jzp] * p_t[:, jrp]                          # (9q, 4a)

        # global quadrature coordinates; z values are shared along columns
        self.quad_z_flat = (cz[:, None] * self.hz
                            + _gx[None, :] * self.hz).ravel()         # (n_z*3,)
        qcol = np.arange(self.n_cells)[:, None] % self.n_z
        self.quad_z_index = qcol * 3 + (np.arange(9)[None, :] % 3)    # (nc, 9)
        self.quad_r = (self._cell_cr[:, None] + self.quad_t[None, :]) * self.hr
        self.quad_z = self.quad_z_flat[self.quad_z_index]

        # boundary node sets (top nodes ordered by z to match the trace map)
        top_row = self.n_rows - 1
        self.top_nodes = top_row * self.n_cols + iz
        self.bottom_nodes = iz.copy()
        self.inlet_nodes = ir * self.n_cols
        self.outlet_nodes = ir * self.n_cols + (self.n_cols - 1)

        # inlet/outlet edge integrals of the axial trace basis (sum to 1)
        w1d = np.zeros(self.n_rows)
        v_t1, _ = _q2_shapes(_gx)
        cellw = self.hr * (_gw @ v_t1)            # (1/6, 2/3, 1/6) * hr
        for c in range(self.n_r):
            w1d[2 * c:2 * c + 3] += cellw
        self.edge_weights = w1d

        self._vv_pattern = None
        self._pv_pattern = None

    # -- patterns ---------------------------------------------------------

    def vv_pattern(self):
        if self._vv_pattern is None:
            nv = self.n_velocity_nodes
            comp = np.arange(2)
            rows = (comp[:, None, None, None, None] * nv
                    + self.conn_v[None, None, :, :, None])
            cols = (comp[None, :, None, None, None] * nv
                    + self.conn_v[None, None, :, None, :])
            rows = np.broadcast_to(rows, (2, 2, self.n_cells, 9, 9))
            cols = np.broadcast_to(cols, (2, 2, self.n_cells, 9, 9))
            self._vv_pattern = ScatterPattern(rows, cols, (2 * nv, 2 * nv))
        return self._vv_pattern

    def pv_pattern(self):
        if self._pv_pattern is None:
            nv = self.n_velocity_nodes
            comp = np.arange(2)
            rows = np.broadcast_to(
                self.conn_p[None, :, :, None], (2, self.n_cells, 4, 9))
            cols = (comp[:, None, None, None] * nv
                    + self.conn_v[None, :, None, :])
            cols = np.broadcast_to(cols, (2, self.n_cells, 4, 9))
            self._pv_pattern = ScatterPattern(
                rows, cols, (self.n_pressure_nodes, 2 * nv))
        return self._pv_pattern

    def _vv_blocks(self):
        return np.zeros((2, 2, self.n_cells, 9, 9))

    # -- field sampling ----------------------------------------------------

    def velocity_at_quad(self, u_full):
        """Both velocity components at the quadrature points, (2, nc, nq)."""
        nv = self.n_velocity_nodes
        u = np.asarray(u_full, dtype=float)
        uz = u[:nv][self.conn_v]           # (nc, 9 local dofs)
        ur = u[nv:][self.conn_v]
        return np.stack([
            np.einsum("ca,qa->cq", uz, self.phi),
            np.einsum("ca,qa->cq", ur, self.phi),
        ])

    def interpolate_velocity(self, fz, fr):
        """Full velocity DOF vector from component callables fz(z, r), fr(z, r)."""
        zg, rg = np.meshgrid(self.velocity_z, self.velocity_r)
        u = np.empty(2 * self.n_velocity_nodes)
        u[:self.n_velocity_nodes] = np.asarray(fz(zg, rg)).ravel()
        u[self.n_velocity_nodes:] = np.asarray(fr(zg, rg)).ravel()
        return u


def shell_field_at_quad(shell_mesh, field_free, fluid_mesh, deriv=0):
    """Sample a wall field (z-dependent only) on the fluid quadrature grid."""
    vals = shell_mesh.evaluate(field_free, fluid_mesh.quad_z_flat, deriv=deriv)
    return vals[fluid_mesh.quad_z_index]


def _transformed_basis_gradients(mesh, snapshot):
    """Per-cell transformed partials (G1, G2) of every velocity basis."""
    factor = mesh.quad_r * snapshot.deta_q / snapshot.jac_q       # (nc, nq)
    g1 = mesh.dphi_dz[None, :, :] - factor[:, :, None] * mesh.dphi_dr[None, :, :]
    g2 = mesh.dphi_dr[None, :, :] / snapshot.jac_q[:, :, None]
    return g1, g2


def assemble_weighted_mass(mesh, snapshot):
    """Velocity mass with the Jacobian weight R + eta (SPD)."""
    w = mesh.quad_w_dv[None, :] * snapshot.jac_q
    blk = np.einsum("cq,qa,qb->cab", w, mesh.phi, mesh.phi)
    data = mesh._vv_blocks()
    data[0, 0] = blk
    data[1, 1] = blk
    return mesh.vv_pattern().csr(data)


def assemble_unweighted_mass(mesh):
    """Plain velocity mass on the reference rectangle (norms, diagnostics)."""
    w = np.broadcast_to(mesh.quad_w_dv[None, :], (mesh.n_cells, mesh.n_quad))
    blk = np.einsum("cq,qa,qb->cab", w, mesh.phi, mesh.phi)
    data = mesh._vv_blocks()
    data[0, 0] = blk
    data[1, 1] = blk
    return mesh.vv_pattern().csr(data)


def assemble_viscous(mesh, snapshot, mu):
    """Weighted viscous operator 2*mu*(strain(u), strain(q)), symmetric PSD."""
    g1, g2 = _transformed_basis_gradients(mesh, snapshot)
    w = mesh.quad_w_dv[None, :] * snapshot.jac_q
    def form(xa, xb):
        return np.einsum("cq,cqa,cqb->cab", w, xa, xb)
    data = mesh._vv_blocks()
    data[0, 0] = 2.0 * mu * form(g1, g1) + mu * form(g2, g2)
    data[1, 1] = 2.0 * mu * form(g2, g2) + mu * form(g1, g1)
    data[0, 1] = mu * form(g2, g1)
    data[1, 0] = mu * form(g1, g2)
    return mesh.vv_pattern().csr(data)


def assemble_advection(mesh, snapshot, u_advect_full, v_half_q, rho_f):
    """Skew-symmetrized transport operator.

    The advecting field is the previous velocity minus the domain velocity
    v_half * r * e_r; the two antisymmetrized terms make q^T N q = 0 exactly,
    entry by entry, so the assembled matrix satisfies N = -N^T to roundoff.
    """
    from .ale import DomainVelocityField
    g1, g2 = _transformed_basis_gradients(mesh, snapshot)
    a = mesh.velocity_at_quad(u_advect_full)
    domain_vel = DomainVelocityField(
        v_half_q=np.broadcast_to(np.asarray(v_half_q, dtype=float),
                                 mesh.quad_r.shape),
        r_q=mesh.quad_r)
    a1 = a[0]
    a2 = a[1] - domain_vel.w_r
    adv = a1[:, :, None] * g1 + a2[:, :, None] * g2       # (nc, nq, 9)
    w = mesh.quad_w_dv[None, :] * snapshot.jac_q
    x = np.einsum("cq,qa,cqb->cab", w, mesh.phi, adv)
    blk = 0.5 * rho_f * (x - np.swapaxes(x, 1, 2))
    data = mesh._vv_blocks()
    data[0, 0] = blk
    data[1, 1] = blk
    return mesh.vv_pattern().csr(data)


def assemble_robin_mass(mesh, v_half_q):
    """Velocity mass weighted by the wall half-step velocity alone.

    No Jacobian weight and no r factor: exactly this form combines with the
    weighted mass into the weight R + eta + dt * v_half at every quadrature
    point, which is the kinetic-energy update identity the scheme relies on.
    """
    w = mesh.quad_w_dv[None, :] * np.broadcast_to(
        np.asarray(v_half_q, dtype=float), (mesh.n_cells, mesh.n_quad))
    blk = np.einsum("cq,qa,qb->cab", w, mesh.phi, mesh.phi)
    data = mesh._vv_blocks()
    data[0, 0] = blk
    data[1, 1] = blk
    return mesh.vv_pattern().csr(data)


def assemble_divergence(mesh, snapshot):
    """Weighted divergence coupling: rows pressures, columns velocities."""
    g1, g2 = _transformed_basis_gradients(mesh, snapshot)
    w = mesh.quad_w_dv[None, :] * snapshot.jac_q
    data = np.stack([
        np.einsum("cq,qa,cqb->cab", w, mesh.chi, g1),
        np.einsum("cq,qa,cqb->cab", w, mesh.chi, g2),
    ])
    return mesh.pv_pattern().csr(data)


def assemble_pressure_forcing(mesh, p_in, p_out, radius):
    """Inlet/outlet load vector R * (P_in * int q_z|_in - P_out * int q_z|_out).

    Loads only axial DOFs on the vertical edges; inflow is positive at z = 0.
    """
    f = np.zeros(2 * mesh.n_velocity_nodes)
    f[mesh.inlet_nodes] += radius * p_in * mesh.edge_weights
    f[mesh.outlet_nodes] -= radius * p_out * mesh.edge_weights
    return f


def top_edge_mass(mesh):
    """1D mass matrix of the axial trace basis on the top edge (dense)."""
    n = mesh.n_cols
    m = np.zeros((n, n))
    v, _ = _q2_shapes(_gx)
    cellm = mesh.hz * np.einsum("q,qa,qb->ab", _gw, v, v)
    for c in range(mesh.n_z):
        sl = slice(2 * c, 2 * c + 3)
        m[sl, sl] += cellm
    return m


class DofPartition:
    """Classification of velocity DOFs into free, coupled, and fixed sets.

    Fixed (eliminated at zero): axial component on the top edge, radial
    component on the bottom, inlet and outlet edges.  Coupled: radial
    component on the top edge, slaved to the wall velocity through the
    trace map (the corner values come out exactly zero because the wall
    space is clamped).  Everything else is free.
    """

    def __init__(self, mesh):
        nv = mesh.n_velocity_nodes
        fixed = np.zeros(2 * nv, dtype=bool)
        coupled = np.zeros(2 * nv, dtype=bool)
        fixed[mesh.top_nodes] = True                     # u_z = 0 on top
        fixed[nv + mesh.bottom_nodes] = True             # u_r = 0 symmetry
        fixed[nv + mesh.inlet_nodes] = True
        fixed[nv + mesh.outlet_nodes] = True
        coupled[nv + mesh.top_nodes] = True              # u_r = trace of wall v
        fixed &= ~coupled
        self.top_r = nv + mesh.top_nodes                 # ordered by z
        self.free = np.where(~(fixed | coupled))[0]
        self.fixed = np.where(fixed)[0]
        self.n_free = self.free.size
