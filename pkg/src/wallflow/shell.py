"""Cubic Hermite discretization of the wall on (0, L).

The wall displacement and velocity live in the clamped space (value and
slope pinned at both ends), which the C1 Hermite elements represent
conformingly; that is what makes the fourth-order bending term assemblable
as a plain Gram matrix of second derivatives.
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import sparsela

# 4-point Gauss on [0,1]: exact through degree 7, enough for products of
# cubic shape functions and their derivatives.
_QX, _QW = leggauss(4)
_QX = 0.5 * (_QX + 1.0)
_QW = 0.5 * _QW


def _shape_table(s, deriv):
    """Hermite shapes on [0,1] for unit element length, one row per point.

    Columns: value-left, slope-left, value-right, slope-right.  Slope
    columns must be scaled by the element length l, derivative order d
    divides the whole table by l**d.
    """
    s = np.asarray(s, dtype=float)
    if deriv == 0:
        cols = [1 - 3 * s**2 + 2 * s**3, s - 2 * s**2 + s**3,
                3 * s**2 - 2 * s**3, s**3 - s**2]
    elif deriv == 1:
        cols = [-6 * s + 6 * s**2, 1 - 4 * s + 3 * s**2,
                6 * s - 6 * s**2, 3 * s**2 - 2 * s]
    elif deriv == 2:
        cols = [-6 + 12 * s, -4 + 6 * s, 6 - 12 * s, 6 * s - 2]
    else:
        raise ValueError(f"unsupported derivative order {deriv}")
    return np.stack(cols, axis=-1)


def hermite_element_matrices(length):
    """Element Gram matrices (L2, first-, second-derivative) for one element."""
    out = []
    for deriv in (0, 1, 2):
        t = _shape_table(_QX, deriv)
        scale = np.array([1.0, length, 1.0, length])
        base = np.einsum("q,qa,qb->ab", _QW, t, t)
        base = 0.5 * (base + base.T)    # forms are symmetric; make it exact
        out.append(length ** (1 - 2 * deriv) * (scale[:, None] * base * scale[None, :]))
    return tuple(out)


class ShellMesh:
    """1D mesh of Hermite elements with clamped end conditions.

    DOF conventions: a *full* vector stores (value, slope) per node,
    ``full[2k]`` and ``full[2k+1]``; the *free* vector drops the four
    clamped end DOFs and is what the solvers work with.
    """

    def __init__(self, n_elements, length, nodes=None):
        if n_elements < 1:
            raise ValueError("need at least one element")
        self.n_elements = int(n_elements)
        self.length = float(length)
        if nodes is None:
            nodes = np.linspace(0.0, self.length, self.n_elements + 1)
        self.nodes = np.asarray(nodes, dtype=float)
        if not np.all(np.diff(self.nodes) > 0):
            raise ValueError("shell nodes must be strictly increasing")
        self.n_nodes = self.nodes.size
        self.element_lengths = np.diff(self.nodes)
        self.n_free = 2 * (self.n_nodes - 2)
        # full-dof index -> free index, -1 for clamped DOFs
        self.full_to_free = -np.ones(2 * self.n_nodes, dtype=np.int64)
        self.full_to_free[2:-2] = np.arange(self.n_free)

    def to_full(self, free):
        full = np.zeros(2 * self.n_nodes)
        full[2:-2] = free
        return full

    def to_free(self, full):
        return np.asarray(full, dtype=float)[2:-2].copy()

    def zero_free(self):
        return np.zeros(self.n_free)

    def quad_points(self):
        """Global coordinates of all element quadrature points."""
        return (self.nodes[:-1, None] + self.element_lengths[:, None] * _QX[None, :]).ravel()

    def interpolate(self, fn, dfn):
        """Full DOF vector interpolating ``fn`` with exact slopes ``dfn``."""
        full = np.empty(2 * self.n_nodes)
        full[0::2] = fn(self.nodes)
        full[1::2] = dfn(self.nodes)
        return full

    def evaluate(self, dofs, z, deriv=0):
        """Evaluate the Hermite field (or a z-derivative) at points ``z``.

        ``dofs`` may be a full vector or a free vector.
        """
        dofs = np.asarray(dofs, dtype=float)
        if dofs.size == self.n_free:
            dofs = self.to_full(dofs)
        z = np.atleast_1d(np.asarray(z, dtype=float))
        k = np.clip(np.searchsorted(self.nodes, z, side="right") - 1,
                    0, self.n_elements - 1)
        lk = self.element_lengths[k]
        s = (z - self.nodes[k]) / lk
        t = _shape_table(s, deriv) / lk[:, None] ** deriv
        t[:, 1] *= lk
        t[:, 3] *= lk
        base = 2 * k
        vals = (t[:, 0] * dofs[base] + t[:, 1] * dofs[base + 1]
                + t[:, 2] * dofs[base + 2] + t[:, 3] * dofs[base + 3])
        return vals

    def element_dofs_free(self):
        """(n_elements, 4) free indices per element, -1 where clamped."""
        base = 2 * np.arange(self.n_elements)[:, None]
        cols = base + np.array([0, 1, 2, 3])[None, :]
        return self.full_to_free[cols]


def _assemble_gram(mesh, deriv):
    """Free-space Gram matrix of the ``deriv``-th derivative of the basis."""
    edofs = mesh.element_dofs_free()
    blocks = np.stack([hermite_element_matrices(l)[deriv]
                       for l in mesh.element_lengths])
    rows = np.repeat(edofs[:, :, None], 4, axis=2)
    cols = np.repeat(edofs[:, None, :], 4, axis=1)
    keep = (rows >= 0) & (cols >= 0)
    return sparsela.build_csr(rows[keep], cols[keep], blocks[keep],
                              (mesh.n_free, mesh.n_free))


def assemble_mass(mesh):
    """L2 Gram matrix of the Hermite basis on free DOFs (SPD)."""
    return _assemble_gram(mesh, 0)


def assemble_grams(mesh):
    """The three Gram matrices (L2, d/dz, d2/dz2) used by the wall forms."""
    return tuple(_assemble_gram(mesh, d) for d in (0, 1, 2))


def assemble_elastic_form(mesh, coeffs, grams=None):
    """Stiffness C0*G0 + C1*G1 + C2*G2 of the elastic wall operator."""
    g0, g1, g2 = grams if grams is not None else assemble_grams(mesh)
    return coeffs.C0 * g0 + coeffs.C1 * g1 + coeffs.C2 * g2


def assemble_viscous_form(mesh, coeffs, grams=None):
    """Damping D0*G0 + D1*G1 + D2*G2; the zero matrix for an elastic wall."""
    g0, g1, g2 = grams if grams is not None else assemble_grams(mesh)
    return coeffs.D0 * g0 + coeffs.D1 * g1 + coeffs.D2 * g2


@dataclass
class ShellState:
    """Free-DOF wall state: displacement, velocity, and the half-step
    velocity produced by the elastodynamics half step."""

    eta: np.ndarray
    v: np.ndarray
    v_star: np.ndarray

    @classmethod
    def zeros(cls, mesh):
        return cls(mesh.zero_free(), mesh.zero_free(), mesh.zero_free())

    def copy(self):
        return ShellState(self.eta.copy(), self.v.copy(), self.v_star.copy())


def structure_step(state, dt, mass, elastic, rho_s_h, tol=1e-12):
    """Advance the wall elastodynamics half step.

    Solves the one-matrix eliminated system

        (rho_s_h * M + dt^2 * A) eta_half = rho_s_h * M (eta + dt * v)

    and recovers the half-step velocity v_half = (eta_half - eta) / dt,
    which is exact by definition.  The fluid state is untouched in this
    half step.  Returns a new ShellState with ``eta`` advanced and
    ``v_star`` holding v_half; ``v`` (the full-step wall velocity) is
    carried unchanged until the fluid step replaces it.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if state.eta.size == 0:    # fully clamped wall (single-element mesh)
        return ShellState(eta=state.eta.copy(), v=state.v.copy(),
                          v_star=np.zeros(0))
    a = (rho_s_h * mass + dt * dt * elastic).tocsc()
    rhs = rho_s_h * (mass @ (state.eta + dt * state.v))
    eta_half = sparsela.factor_solve(a, rhs, tol=tol, symmetric=True)
    v_half = (eta_half - state.eta) / dt
    return ShellState(eta=eta_half, v=state.v.copy(), v_star=v_half)


def shell_energy(eta, v, mass, elastic, rho_s_h):
    """0.5 * (rho_s_h ||v||_M^2 + ||eta||_A^2), the wall part of the energy."""
    return 0.5 * (rho_s_h * float(v @ (mass @ v)) + float(eta @ (elastic @ eta)))


def structure_step_energy_residual(before, after, mass, elastic, rho_s_h):
    """Absolute defect of the half-step energy equality.

    The half step satisfies, exactly in exact arithmetic,

        E_half + 0.5 * (rho_s_h ||v_half - v||_M^2 + ||eta_half - eta||_A^2) = E

    where E collects the wall kinetic and elastic energies (the fluid
    kinetic term is identical on both sides and cancels).  The returned
    value is |LHS - RHS|, not normalized.
    """
    e_before = shell_energy(before.eta, before.v, mass, elastic, rho_s_h)
    e_after = shell_energy(after.eta, after.v_star, mass, elastic, rho_s_h)
    dv = after.v_star - before.v
    de = after.eta - before.eta
    jumps = 0.5 * (rho_s_h * float(dv @ (mass @ dv)) + float(de @ (elastic @ de)))
    return abs(e_after + jumps - e_before)
