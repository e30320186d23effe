"""Time loop: alternate the wall elastodynamics half step and the coupled
fluid step, manage state history, pressure averaging, contact halting, and
run finalization.

The splitting per step n:

1. wall half step from (eta_n, v_n), giving eta_half and v_half; the fluid
   is untouched;
2. coupled fluid step on the geometry frozen at eta_n, with domain velocity
   v_half, giving (u_new, v_new); the wall displacement is untouched, so
   eta_{n+1} = eta_half = eta_n + dt * v_half exactly.

The geometry-from-the-start-of-step / velocity-from-the-half-step pairing
is what makes the kinetic-energy weight update an identity; don't "fix" it.
"""

import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import ale, coupling, fluid, shell
from .config import build_material, ingest_waveform
from .energy import EnergyLedger, EnergyMonitor, discrete_trace_constant
from .errors import ConfigError, SolverError, ValidationError, WallContact
from .materials import derive_coefficients, validate_compatibility

STATUS_COMPLETED = "completed"
STATUS_WALL_CONTACT = "wall-contact"
STATUS_SOLVER_FAILURE = "solver-failure"

EXIT_CODES = {STATUS_COMPLETED: 0, STATUS_WALL_CONTACT: 2,
              STATUS_SOLVER_FAILURE: 3}


@dataclass
class TrajectoryRecord:
    """Snapshots at the configured cadence, plus the final state.

    Stored fields are piecewise constant in time between steps; timestamps
    are exact multiples of dt.  ``linear_interpolant`` exposes the
    continuous piecewise-linear reading of the same records.
    """

    dt: float
    times: list = field(default_factory=list)
    etas: list = field(default_factory=list)        # full Hermite DOFs
    vs: list = field(default_factory=list)          # full Hermite DOFs
    v_stars: list = field(default_factory=list)     # full Hermite DOFs
    us: list = field(default_factory=list)          # full velocity DOFs
    ps: list = field(default_factory=list)

    def store(self, t, eta_full, v_full, v_star_full, u_full, p):
        self.times.append(float(t))
        self.etas.append(np.asarray(eta_full).copy())
        self.vs.append(np.asarray(v_full).copy())
        self.v_stars.append(np.asarray(v_star_full).copy())
        self.us.append(np.asarray(u_full).copy())
        self.ps.append(np.asarray(p).copy())

    def __len__(self):
        return len(self.times)

    def state_at(self, t):
        """Piecewise-constant reading: latest stored state with time <= t."""
        if not self.times:
            raise ValueError("empty record")
        i = int(np.searchsorted(self.times, t + 1e-15, side="right") - 1)
        i = max(i, 0)
        return {"t": self.times[i], "eta": self.etas[i], "v": self.vs[i],
                "v_star": self.v_stars[i], "u": self.us[i], "p": self.ps[i]}

    def linear_interpolant(self, t):
        """Continuous, linear-in-time reading between stored snapshots."""
        ts = np.asarray(self.times)
        if not len(ts):
            raise ValueError("empty record")
        t = min(max(t, ts[0]), ts[-1])
        j = int(np.clip(np.searchsorted(ts, t, side="right"), 1, len(ts) - 1))
        w = (t - ts[j - 1]) / (ts[j] - ts[j - 1]) if ts[j] > ts[j - 1] else 0.0
        lerp = lambda a: (1 - w) * a[j - 1] + w * a[j]
        return {"t": t, "eta": lerp(self.etas), "v": lerp(self.vs),
                "u": lerp(self.us)}


@dataclass
class RunResult:
    status: str
    record: TrajectoryRecord
    ledger: EnergyLedger
    contact: tuple = None            # (t, z) of first threshold crossing
    failure: str = None
    final: dict = None               # free-DOF eta/v/v_star, u, p, t

    @property
    def exit_code(self):
        return EXIT_CODES[self.status]


class RunSetup:
    """Meshes, operators, and parameters shared by every step of a run."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.material = build_material(cfg)
        coeffs = derive_coefficients(self.material)
        if cfg["mode"] == "elastic":
            # elastic mode zeroes wall viscosity regardless of inputs;
            # the config layer already rejected contradictory values
            coeffs = type(coeffs)(C0=coeffs.C0, C1=coeffs.C1, C2=coeffs.C2,
                                  D0=0.0, D1=0.0, D2=0.0,
                                  rho_s_h=coeffs.rho_s_h)
        self.coeffs = coeffs
        self.radius = cfg["geometry"]["radius"]
        self.length = cfg["geometry"]["length"]
        self.rho_f = cfg["fluid"]["density"]
        self.mu = cfg["fluid"]["viscosity"]
        self.t_final = cfg["time"]["t_final"]
        self.n_steps = cfg["time"]["n_steps"]
        self.dt = self.t_final / self.n_steps
        self.fluid_mesh = fluid.FluidMesh(cfg["mesh"]["n_z"], cfg["mesh"]["n_r"],
                                          self.length)
        self.shell_mesh = shell.ShellMesh(cfg["mesh"]["wall_elements"],
                                          self.length)
        self.coupled = coupling.make_setup(
            self.fluid_mesh, self.shell_mesh, coeffs, self.rho_f, self.mu,
            solver_tol=cfg["solver"]["fluid_tol"],
            solver_method=cfg["solver"]["method"])
        self.grams = (self.coupled.shell_mass,) + tuple(
            shell.assemble_grams(self.shell_mesh)[1:])
        self.contact_threshold = cfg["contact_threshold_factor"] * self.radius
        base = cfg.get("_base_dir", ".")
        self.wave_in = ingest_waveform(cfg["waveform"]["inlet"], base)
        self.wave_out = ingest_waveform(cfg["waveform"]["outlet"], base)

    def initial_data(self):
        """Full-DOF initial fields per the config, exactly compatible."""
        spec = self.cfg["initial_data"]
        sm, fm = self.shell_mesh, self.fluid_mesh
        if spec["kind"] == "zero":
            eta0 = np.zeros(2 * sm.n_nodes)
            v0 = np.zeros(2 * sm.n_nodes)
            u0 = np.zeros(2 * fm.n_velocity_nodes)
            return eta0, v0, u0
        length = self.length
        amp_e = spec.get("eta_amplitude", 0.0)
        amp_v = spec.get("v_amplitude", 0.0)

        def bump(z):
            s = z / length
            return 16.0 * s**2 * (1.0 - s)**2

        def dbump(z):
            s = z / length
            return 32.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / length

        eta0 = amp_e * sm.interpolate(bump, dbump)
        v0 = amp_v * sm.interpolate(bump, dbump)
        # radial velocity grows linearly from the symmetry line to the wall
        # trace of v0, evaluated through the wall's own basis so the
        # interface condition holds exactly at every edge node
        v0_nodes = sm.evaluate(v0, fm.velocity_z)
        u0 = np.zeros(2 * fm.n_velocity_nodes)
        u0[fm.n_velocity_nodes:] = np.outer(fm.velocity_r, v0_nodes).ravel()
        return eta0, v0, u0


def _trace_constant(setup, snapshot):
    """Pressure-work constant from the discrete trace inequality at the
    initial geometry; combined with the observed per-step requirement by
    the verifier."""
    cs = setup.coupled
    part, t = cs.partition, cs.trace_op
    k = fluid.assemble_viscous(setup.fluid_mesh, snapshot, setup.mu)
    k_rows_f, k_rows_t = k[part.free], k[part.top_r]
    k_red = sp.bmat([
        [k_rows_f[:, part.free], k_rows_f[:, part.top_r] @ t],
        [t.T @ k_rows_t[:, part.free], t.T @ k_rows_t[:, part.top_r] @ t],
    ], format="csc")
    ell = []
    for p_in, p_out in ((1.0, 0.0), (0.0, 1.0)):
        full = fluid.assemble_pressure_forcing(setup.fluid_mesh, p_in, p_out,
                                               1.0)
        full = np.abs(full)   # both functionals as signed flux integrals
        ell.append(np.concatenate([full[part.free],
                                   t.T @ full[part.top_r]]))
    try:
        return discrete_trace_constant(k_red, ell[0], ell[1], setup.radius)
    except SolverError:
        return 0.0


def run(cfg):
    """Execute a configured FSI run; returns trajectory, ledger, status."""
    setup = RunSetup(cfg)
    if cfg["mode"] == "rigid":
        raise ConfigError("rigid mode runs through run_rigid_steady / the "
                          "poiseuille command, not run()")
    sm, fm = setup.shell_mesh, setup.fluid_mesh
    dt, n_steps = setup.dt, setup.n_steps
    cs = setup.coupled

    eta0_full, v0_full, u0 = setup.initial_data()
    report = validate_compatibility(sm, fm, eta0_full, v0_full, u0,
                                    setup.radius, tol=cfg["compatibility_tol"])
    if not report.ok:
        raise ConfigError(["initial data failed compatibility validation"]
                          + [c.name for c in report.failures()])

    state = shell.ShellState(eta=sm.to_free(eta0_full), v=sm.to_free(v0_full),
                             v_star=sm.to_free(v0_full))
    u = u0.copy()
    pressure = np.zeros(fm.n_pressure_nodes)

    record = TrajectoryRecord(dt=dt)
    cadence = cfg["output"]["cadence"]

    try:
        snap = ale.build_snapshot(sm, state.eta, fm, setup.radius,
                                  contact_threshold=setup.contact_threshold)
    except WallContact as contact:
        ledger = EnergyLedger(_ledger_header(setup, 0.0, 0.0))
        return RunResult(STATUS_WALL_CONTACT, record, ledger,
                         contact=(0.0, contact.z_location),
                         final=_final_state(state, u, pressure, 0.0))

    mass_old = fluid.assemble_weighted_mass(fm, snap)
    monitor = EnergyMonitor(cs, setup.grams, setup.coeffs, dt)
    e0 = monitor.total_energy(u, state.v, state.eta, mass_old)
    c_ref = _trace_constant(setup, snap)
    ledger = EnergyLedger(_ledger_header(setup, e0, c_ref))

    record.store(0.0, eta0_full, v0_full, v0_full, u, pressure)

    status, contact_info, failure = STATUS_COMPLETED, None, None
    t = 0.0
    for n in range(n_steps):
        t_next = (n + 1) * dt
        p_in = setup.wave_in.average(n * dt, t_next)
        p_out = setup.wave_out.average(n * dt, t_next)

        half = shell.structure_step(state, dt, cs.shell_mass, cs.shell_elastic,
                                    cs.rho_s_h,
                                    tol=cfg["solver"]["structure_tol"])

        min_r, min_z = ale.min_radius_of(sm, half.eta, setup.radius)
        if min_r <= setup.contact_threshold:
            status, contact_info = STATUS_WALL_CONTACT, (t_next, min_z)
            break

        if cfg["debug_audit"]:
            assert snap.matches(sm, state.eta, fm), \
                "fluid step geometry must be frozen at the start-of-step wall"

        try:
            result = coupling.fluid_step(cs, snap, u, half, dt, p_in, p_out)
        except SolverError as exc:
            status, failure = STATUS_SOLVER_FAILURE, str(exc)
            break
        if not (np.all(np.isfinite(result.u_full))
                and np.all(np.isfinite(result.v_new))
                and np.all(np.isfinite(result.pressure))):
            status, failure = STATUS_SOLVER_FAILURE, "non-finite solution fields"
            break

        snap_new = ale.build_snapshot(sm, half.eta, fm, setup.radius,
                                      contact_threshold=None)
        mass_new = fluid.assemble_weighted_mass(fm, snap_new)
        ledger.append(monitor.record_step(n, state, u, half, result,
                                          mass_old, mass_new, p_in, p_out))

        state = shell.ShellState(eta=half.eta, v=result.v_new,
                                 v_star=half.v_star)
        u, pressure = result.u_full, result.pressure
        snap, mass_old = snap_new, mass_new
        t = t_next
        if (n + 1) % cadence == 0 and n + 1 < n_steps:
            record.store(t, sm.to_full(state.eta), sm.to_full(state.v),
                         sm.to_full(state.v_star), u, pressure)

    if not record.times or record.times[-1] != t:
        record.store(t, sm.to_full(state.eta), sm.to_full(state.v),
                     sm.to_full(state.v_star), u, pressure)
    return RunResult(status, record, ledger, contact=contact_info,
                     failure=failure,
                     final=_final_state(state, u, pressure, t))


def _final_state(state, u, pressure, t):
    return {"t": t, "eta": state.eta.copy(), "v": state.v.copy(),
            "v_star": state.v_star.copy(), "u": u.copy(),
            "p": pressure.copy()}


def _ledger_header(setup, e0, c_ref):
    c = setup.coeffs
    return {
        "rho_f": setup.rho_f, "mu": setup.mu, "rho_s_h": c.rho_s_h,
        "radius": setup.radius, "length": setup.length,
        "dt": setup.dt, "n_steps": setup.n_steps, "mode": setup.cfg["mode"],
        "C0": c.C0, "C1": c.C1, "C2": c.C2,
        "D0": c.D0, "D1": c.D1, "D2": c.D2,
        "n_z": setup.fluid_mesh.n_z, "n_r": setup.fluid_mesh.n_r,
        "wall_elements": setup.shell_mesh.n_elements,
        "e0": e0, "c_ref": c_ref,
        "p_in_l2_sq": setup.wave_in.l2_norm_sq(0.0, setup.t_final),
        "p_out_l2_sq": setup.wave_out.l2_norm_sq(0.0, setup.t_final),
    }


def v_vstar_gap(result):
    """Space-time L2 gap between the wall velocity and its half-step
    predictor over a completed run."""
    return result.ledger.v_vstar_gap()


# -- rigid-wall test harness -------------------------------------------------


def run_rigid_steady(cfg, steady_tol=1e-10, max_steps=None):
    """March the rigid-wall configuration to a steady state.

    The wall is frozen (every top-edge DOF is zero) and the geometry stays
    at eta = 0; this is a test-harness mode for pressure-driven channel
    flow regressions.  Returns (u_full, pressure, steps_taken, increment).
    """
    setup = RunSetup(cfg)
    fm, sm = setup.fluid_mesh, setup.shell_mesh
    dt = setup.dt
    snap = ale.build_snapshot(sm, sm.zero_free(), fm, setup.radius,
                              contact_threshold=None)
    u = np.zeros(2 * fm.n_velocity_nodes)
    pressure = np.zeros(fm.n_pressure_nodes)
    steps = max_steps if max_steps is not None else setup.n_steps
    increment = math.inf
    taken = 0
    for n in range(steps):
        p_in = setup.wave_in.average(n * dt, (n + 1) * dt)
        p_out = setup.wave_out.average(n * dt, (n + 1) * dt)
        result = coupling.rigid_fluid_step(setup.coupled, snap, u, dt,
                                           p_in, p_out)
        du = np.linalg.norm(result.u_full - u)
        scale = max(np.linalg.norm(result.u_full), 1e-30)
        increment = du / scale
        u, pressure = result.u_full, result.pressure
        taken = n + 1
        if increment < steady_tol:
            break
    return u, pressure, taken, increment


def _column_l2_sq(vals, h):
    """Exact L2 norm squared of the per-cell quadratic interpolant through
    3-node column values spaced h/2 apart."""
    total = 0.0
    for c in range((len(vals) - 1) // 2):
        f0, f1, f2 = vals[2 * c], vals[2 * c + 1], vals[2 * c + 2]
        a = f0
        b = -3.0 * f0 + 4.0 * f1 - f2
        q = 2.0 * f0 - 4.0 * f1 + 2.0 * f2
        total += h * (a * a + a * b + (b * b + 2.0 * a * q) / 3.0
                      + b * q / 2.0 + q * q / 5.0)
    return total


def poiseuille_profile_error(cfg, steady_tol=1e-10):
    """L2-relative mismatch of the steady mid-channel axial profile against
    the parabolic solution of pressure-driven flow between the symmetry
    line and a no-slip wall."""
    setup = RunSetup(cfg)
    u, _, steps, increment = run_rigid_steady(cfg, steady_tol=steady_tol)
    fm = setup.fluid_mesh
    radius, length, mu = setup.radius, setup.length, setup.mu
    dp = (setup.wave_in.average(0.0, setup.dt)
          - setup.wave_out.average(0.0, setup.dt))
    mid = fm.n_z  # velocity column at z = L/2
    profile = u[:fm.n_velocity_nodes].reshape(fm.n_rows, fm.n_cols)[:, mid]
    r_phys = radius * fm.velocity_r
    exact = dp / (2.0 * mu * length) * (radius**2 - r_phys**2)
    err = math.sqrt(_column_l2_sq(profile - exact, fm.hr))
    norm = math.sqrt(_column_l2_sq(exact, fm.hr))
    return err / norm, {"steps": steps, "increment": increment,
                        "profile": profile, "exact": exact}


# -- temporal self-convergence harness ----------------------------------------


def fit_order(dts, errors):
    """Least-squares slope of log(error) against log(dt).

    Rejects degenerate inputs: fewer than two rungs, repeated dt values,
    or exactly zero errors (a rung identical to the reference).
    """
    dts = np.asarray(dts, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if dts.size < 2:
        raise ValidationError("order fit needs at least two rungs")
    if np.unique(dts).size != dts.size:
        raise ValidationError("order fit rungs must have distinct dt")
    if np.any(errors <= 0.0):
        raise ValidationError("order fit got a zero error rung (is a rung "
                              "identical to the reference?)")
    slope, _ = np.polyfit(np.log(dts), np.log(errors), 1)
    return float(slope)


def _with_steps(cfg, n_steps):
    new = {k: (dict(v) if isinstance(v, dict) else v) for k, v in cfg.items()}
    new["time"] = dict(cfg["time"])
    new["time"]["n_steps"] = int(n_steps)
    return new


def _run_final(cfg_steps):
    cfg, n_steps = cfg_steps
    result = run(_with_steps(cfg, n_steps))
    if result.status != STATUS_COMPLETED:
        raise SolverError(f"convergence rung with {n_steps} steps ended "
                          f"with status {result.status}")
    return {"eta": result.final["eta"], "v": result.final["v"],
            "u": result.final["u"], "gap": result.ledger.v_vstar_gap()}


@dataclass
class ConvergenceReport:
    dts: list
    errors: dict        # field -> list of errors per rung
    orders: dict        # field -> fitted slope
    gaps: list
    gap_order: float

    def __str__(self):
        lines = ["dt ladder: " + ", ".join(f"{d:.4e}" for d in self.dts)]
        for name, errs in self.errors.items():
            errline = ", ".join(f"{e:.4e}" for e in errs)
            lines.append(f"{name} errors: {errline}  (order "
                         f"{self.orders[name]:.3f})")
        lines.append("v-v* gaps: " + ", ".join(f"{g:.4e}" for g in self.gaps)
                     + f"  (order {self.gap_order:.3f})")
        return "\n".join(lines)


def self_convergence_study(cfg, rung_steps, reference_steps, workers=None):
    """Errors at the final time against a fine-dt reference of the same run.

    The spatial mesh is shared by every rung, so the observed order isolates
    the time discretization.  ``workers`` (default: the WALLFLOW_WORKERS
    environment variable) runs rungs in separate processes; results do not
    depend on the worker count.
    """
    rung_steps = sorted(int(n) for n in rung_steps)
    if reference_steps in rung_steps:
        raise ValidationError("reference resolution duplicates a rung")
    t_final = cfg["time"]["t_final"]
    jobs = [(cfg, n) for n in rung_steps + [reference_steps]]
    if workers is None:
        workers = int(os.environ.get("WALLFLOW_WORKERS", "1"))
    if workers > 1:
        import multiprocessing
        with multiprocessing.Pool(workers) as pool:
            outs = pool.map(_run_final, jobs)
    else:
        outs = [_run_final(j) for j in jobs]
    ref = outs[-1]
    rungs = outs[:-1]

    setup = RunSetup(cfg)
    ms = setup.coupled.shell_mass
    mu_mass = fluid.assemble_unweighted_mass(setup.fluid_mesh)

    def norm(m, x):
        return math.sqrt(max(float(x @ (m @ x)), 0.0))

    errors = {"eta": [], "u": [], "v": []}
    for out in rungs:
        errors["eta"].append(norm(ms, out["eta"] - ref["eta"]))
        errors["v"].append(norm(ms, out["v"] - ref["v"]))
        errors["u"].append(norm(mu_mass, out["u"] - ref["u"]))
    dts = [t_final / n for n in rung_steps]
    orders = {name: fit_order(dts, errs) for name, errs in errors.items()}
    gaps = [out["gap"] for out in rungs]
    gap_order = fit_order(dts, gaps)
    return ConvergenceReport(dts=dts, errors=errors, orders=orders,
                             gaps=gaps, gap_order=gap_order)
