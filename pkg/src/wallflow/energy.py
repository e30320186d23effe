"""Per-step energy bookkeeping and the run-level verifier.

Every completed step appends one ledger row holding the semi-discrete
energies, the dissipation, every squared jump term, the pressure work, and
the defects of the two per-step identities:

* the wall half step satisfies an exact energy *equality* (kinetic +
  elastic energy plus squared jumps is conserved);
* the fluid step satisfies an exact balance whose damped form is the
  stability inequality: the end-of-step energy plus jumps plus dissipation
  equals the start energy plus the pressure work.

Summing both telescopes to the uniform bound
``E_final + sum(dissipation + jumps) - sum(pressure work) = E_0``, which
:func:`verify_run` checks along with per-step residuals, monotonicity under
zero forcing, and the pressure-data bound with a computed (never assumed)
constant.

Conventions: ``d_fluid`` rows store dt * mu * integral of the weighted
squared strain rate (half the quadratic form of the assembled viscous
operator); the exact balance carries twice that, and the inequality form
keeps the difference as slack against the pressure-work estimate.  Jumps
are stored as raw quadratic forms (no 1/2, no densities), with densities
reapplied by the verifier from the header.
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import WallflowError
from .sparsela import factor_solve

LEDGER_COLUMNS = [
    "step", "t", "e_n", "e_half", "e_full",
    "d_fluid", "d_shell",
    "jump_u", "jump_v_a2", "jump_v_a1",
    "jump_eta_c0", "jump_eta_c1", "jump_eta_c2",
    "pwork", "p_in", "p_out",
    "wall_step_residual", "balance_residual",
    "mass_update_residual", "mass_update_scale",
    "advection_skew", "advection_scale",
]

ENERGY_FLOOR = 1e-30


class EnergyLedger:
    """Append-only record of per-step energies and identity residuals."""

    def __init__(self, header=None):
        self.header = dict(header or {})
        self.rows = []

    def append(self, row):
        missing = [c for c in LEDGER_COLUMNS if c not in row]
        if missing:
            raise WallflowError(f"ledger row is missing columns: {missing}")
        self.rows.append({c: row[c] for c in LEDGER_COLUMNS})

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=float)

    def energy_scale(self):
        e0 = float(self.header.get("e0", 0.0))
        vals = [e0, ENERGY_FLOOR]
        if self.rows:
            vals += [self.column("e_half").max(), self.column("e_full").max()]
        return max(vals)

    def v_vstar_gap(self):
        """Space-time L2 distance between the wall velocity and its
        half-step predictor, from the piecewise-constant records."""
        if not self.rows:
            return 0.0
        dt = float(self.header["dt"])
        return math.sqrt(dt * float(np.sum(self.column("jump_v_a2"))))

    # -- serialization ---------------------------------------------------

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            f.write("# wallflow-ledger-header: "
                    + json.dumps(self.header, sort_keys=True) + "\n")
            w = csv.writer(f)
            w.writerow(LEDGER_COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(r[c]) for c in LEDGER_COLUMNS])

    @classmethod
    def from_csv(cls, path):
        with open(path) as f:
            first = f.readline()
            if not first.startswith("# wallflow-ledger-header:"):
                raise WallflowError(f"{path} is not a ledger CSV")
            header = json.loads(first.split(":", 1)[1])
            reader = csv.DictReader(f)
            led = cls(header)
            for rec in reader:
                led.append({c: (int(rec[c]) if c == "step" else float(rec[c]))
                            for c in LEDGER_COLUMNS})
        return led

    def to_jsonl(self, path):
        with open(path, "w") as f:
            f.write(json.dumps({"kind": "header", **self.header},
                               sort_keys=True) + "\n")
            for r in self.rows:
                f.write(json.dumps({"kind": "row", **r}, sort_keys=True) + "\n")

    @classmethod
    def from_jsonl(cls, path):
        led = None
        with open(path) as f:
            for line in f:
                obj = json.loads(line)
                kind = obj.pop("kind")
                if kind == "header":
                    led = cls(obj)
                elif kind == "row":
                    if led is None:
                        raise WallflowError("ledger rows before header")
                    led.append(obj)
        if led is None:
            raise WallflowError(f"{path} held no ledger header")
        return led


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def load_ledger(path):
    """Read a ledger from CSV or JSONL, sniffing the format."""
    with open(path) as f:
        first = f.readline()
    if first.startswith("# wallflow-ledger-header:"):
        return EnergyLedger.from_csv(path)
    return EnergyLedger.from_jsonl(path)


class EnergyMonitor:
    """Computes ledger rows from the states and operators of each step."""

    def __init__(self, setup, grams, coeffs, dt):
        self.setup = setup
        self.grams = grams          # (G0, G1, G2) wall Gram matrices
        self.coeffs = coeffs
        self.dt = dt

    def _wall_elastic(self, eta):
        g0, g1, g2 = self.grams
        c = self.coeffs
        return (c.C0 * float(eta @ (g0 @ eta)) + c.C1 * float(eta @ (g1 @ eta))
                + c.C2 * float(eta @ (g2 @ eta)))

    def total_energy(self, u_full, v, eta, weighted_mass):
        """E = kinetic (fluid, wall) + elastic wall energy, with the fluid
        kinetic term weighted by the profile the arguments belong to."""
        s = self.setup
        e = (0.5 * s.rho_f * float(u_full @ (weighted_mass @ u_full))
             + 0.5 * s.rho_s_h * float(v @ (s.shell_mass @ v))
             + 0.5 * self._wall_elastic(eta))
        return e

    def record_step(self, step, state_n, u_n, shell_half, result, mass_old,
                    mass_new, p_in, p_out):
        """One ledger row for a completed (wall + fluid) step."""
        s, dt = self.setup, self.dt
        g0, g1, g2 = self.grams
        c = self.coeffs
        ms = s.shell_mass

        e_n = self.total_energy(u_n, state_n.v, state_n.eta, mass_old)
        e_half = self.total_energy(u_n, shell_half.v_star, shell_half.eta,
                                   mass_old)
        e_full = self.total_energy(result.u_full, result.v_new,
                                   shell_half.eta, mass_new)

        d_eta = shell_half.eta - state_n.eta
        dv1 = shell_half.v_star - state_n.v
        du = result.u_full - u_n
        dv2 = result.v_new - shell_half.v_star
        jump_eta = [c.C0 * float(d_eta @ (g0 @ d_eta)),
                    c.C1 * float(d_eta @ (g1 @ d_eta)),
                    c.C2 * float(d_eta @ (g2 @ d_eta))]
        jump_v_a1 = float(dv1 @ (ms @ dv1))
        jump_u = s.rho_f * float(du @ (mass_old @ du))
        jump_v_a2 = float(dv2 @ (ms @ dv2))

        visc2 = float(result.u_full @ (result.operators["viscous"] @ result.u_full))
        d_fluid = dt * 0.5 * visc2
        d_shell = dt * float(result.v_new @ (s.shell_viscous @ result.v_new))
        pwork = dt * float(result.forcing @ result.u_full)

        wall_eq = abs(e_half
                   + 0.5 * (s.rho_s_h * jump_v_a1 + sum(jump_eta)) - e_n)
        balance = abs(e_full + 0.5 * jump_u + 0.5 * s.rho_s_h * jump_v_a2
                      + 2.0 * d_fluid + d_shell - e_half - pwork)

        mass_resid = float(np.max(np.abs(
            mass_old.data + dt * result.operators["robin"].data - mass_new.data)))
        mass_scale = float(np.max(np.abs(mass_new.data)))
        n_adv = result.operators["advection"]
        skew_sum = (n_adv + n_adv.T)
        skew = float(np.abs(skew_sum.data).max()) if skew_sum.nnz else 0.0
        skew_scale = float(np.abs(n_adv.data).max()) if n_adv.nnz else 0.0

        scale = max(e_n, e_half, e_full, ENERGY_FLOOR)
        for name, val in (("e_n", e_n), ("e_half", e_half), ("e_full", e_full)):
            if val < -1e-12 * scale:
                raise WallflowError(
                    f"internal consistency: negative energy {name} = {val:.3e}")

        return {
            "step": int(step), "t": (step + 1) * dt,
            "e_n": e_n, "e_half": e_half, "e_full": e_full,
            "d_fluid": d_fluid, "d_shell": d_shell,
            "jump_u": jump_u, "jump_v_a2": jump_v_a2, "jump_v_a1": jump_v_a1,
            "jump_eta_c0": jump_eta[0], "jump_eta_c1": jump_eta[1],
            "jump_eta_c2": jump_eta[2],
            "pwork": pwork, "p_in": p_in, "p_out": p_out,
            "wall_step_residual": wall_eq, "balance_residual": balance,
            "mass_update_residual": mass_resid, "mass_update_scale": mass_scale,
            "advection_skew": skew, "advection_scale": skew_scale,
        }


def discrete_trace_constant(k_reduced, l_in_reduced, l_out_reduced, radius):
    """Pressure-work constant from the discrete trace inequality.

    Largest ratio of the squared inlet/outlet flux functionals to the fluid
    viscous dissipation quadratic form, computed exactly from two sparse
    solves (the numerator is rank two).  The returned value C satisfies

        R * (P_in t_in(u) - P_out t_out(u)) <= d(u) + C * (P_in^2 + P_out^2)

    for every discrete u, where d is the *spare* half of the viscous form.
    """
    sols = [factor_solve(k_reduced.tocsc(), 2.0 * l, tol=1e-10, symmetric=True)
            for l in (l_in_reduced, l_out_reduced)]
    gram = np.array([[float(l @ x) for x in sols]
                     for l in (l_in_reduced, l_out_reduced)])
    kappa = float(np.linalg.eigvalsh(0.5 * (gram + gram.T)).max())
    return radius**2 * kappa / 4.0


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        msg = f"[{tag}] {self.name}: value {self.value:.3e}, tolerance {self.tolerance:.1e}"
        if self.detail:
            msg += f" ({self.detail})"
        return msg


@dataclass
class VerdictReport:
    checks: list
    ok: bool
    scale: float
    c_impl: float
    details: dict = field(default_factory=dict)

    def __str__(self):
        lines = [c.line() for c in self.checks]
        lines.append(f"energy scale {self.scale:.6e}, pressure constant "
                     f"C_impl {self.c_impl:.6e}")
        lines.append("verdict: " + ("PASS" if self.ok else "FAIL"))
        return "\n".join(lines)


def verify_run(ledger, tol_struct=1e-10, tol_fluid=1e-8, tol_telescoped=1e-8,
               tol_slack=1e-10, tol_monotone=1e-12):
    """Run-level verification of the per-step identities and uniform bounds.

    Checks, all relative to max(E0, max energies, floor):

    1. wall half-step energy equality residual per step;
    2. fluid-step balance residual per step, and nonnegative slack of the
       damped inequality with the computed pressure constant;
    3. telescoped identity E_final + sum(dissipation + jumps) - sum(work) = E0;
    4. with zero pressure data: the energy chain is nonincreasing;
    5. max energy bounded by E0 plus C_impl times the squared L2 norms of
       the pressure data.

    ``C_impl`` is the larger of the trace constant computed from the actual
    mesh (stored by the driver in the header) and the smallest constant the
    recorded steps require; both are reported, neither is assumed.
    """
    h = ledger.header
    rho_s_h = float(h["rho_s_h"])
    dt = float(h["dt"])
    e0 = float(h.get("e0", 0.0))
    scale = ledger.energy_scale()
    checks = []

    if not ledger.rows:
        checks.append(CheckResult("nonempty ledger", True, 0.0, 0.0,
                                  "empty run: nothing to verify"))
        return VerdictReport(checks, True, scale, float(h.get("c_ref", 0.0)))

    wall_eq = ledger.column("wall_step_residual") / scale
    checks.append(CheckResult("wall half-step energy equality", bool(wall_eq.max() <= tol_struct),
                              float(wall_eq.max()), tol_struct,
                              f"worst step {int(np.argmax(wall_eq))}"))

    bal = ledger.column("balance_residual") / scale
    checks.append(CheckResult("fluid-step energy balance", bool(bal.max() <= tol_fluid),
                              float(bal.max()), tol_fluid,
                              f"worst step {int(np.argmax(bal))}"))

    # smallest constant the recorded steps require, then the max with the
    # mesh trace constant from the header
    p_sq = ledger.column("p_in") ** 2 + ledger.column("p_out") ** 2
    trace_work = ledger.column("pwork") / dt
    spare = ledger.column("d_fluid") / dt
    need = np.zeros_like(p_sq)
    active = p_sq > ENERGY_FLOOR
    need[active] = (trace_work[active] - spare[active]) / p_sq[active]
    c_needed = float(max(0.0, need.max() if need.size else 0.0))
    c_impl = max(float(h.get("c_ref", 0.0)), c_needed)

    e_half = ledger.column("e_half")
    e_full = ledger.column("e_full")
    jump_u = ledger.column("jump_u")
    jump_v_a2 = ledger.column("jump_v_a2")
    jump_v_a1 = ledger.column("jump_v_a1")
    jump_eta = (ledger.column("jump_eta_c0") + ledger.column("jump_eta_c1")
                + ledger.column("jump_eta_c2"))
    d_fluid = ledger.column("d_fluid")
    d_shell = ledger.column("d_shell")

    slack = (e_half + c_impl * dt * p_sq - e_full - 0.5 * jump_u
             - 0.5 * rho_s_h * jump_v_a2 - (d_fluid + d_shell))
    checks.append(CheckResult("stability inequality slack", bool(slack.min() / scale >= -tol_slack),
                              float(slack.min() / scale), -tol_slack,
                              f"worst step {int(np.argmin(slack))}"))

    dissipation_identity = 2.0 * d_fluid + d_shell
    all_jumps = (0.5 * jump_u + 0.5 * rho_s_h * (jump_v_a1 + jump_v_a2)
                 + 0.5 * jump_eta)
    telescoped = abs(float(e_full[-1] + np.sum(dissipation_identity + all_jumps)
                           - np.sum(ledger.column("pwork")) - e0)) / scale
    checks.append(CheckResult("telescoped energy identity", bool(telescoped <= tol_telescoped),
                              telescoped, tol_telescoped))

    if p_sq.max() <= ENERGY_FLOOR:
        chain = np.empty(2 * len(ledger) + 1)
        chain[0] = e0
        chain[1::2] = e_half
        chain[2::2] = e_full
        increases = np.diff(chain)
        worst = float(increases.max() / scale)
        checks.append(CheckResult("zero-forcing energy monotonicity",
                                  bool(worst <= tol_monotone), worst, tol_monotone,
                                  f"{int(np.sum(increases > tol_monotone * scale))} violations"))
    else:
        p_l2 = float(h.get("p_in_l2_sq", 0.0)) + float(h.get("p_out_l2_sq", 0.0))
        bound = e0 + c_impl * p_l2
        ratio = float(max(e_half.max(), e_full.max()) / max(bound, ENERGY_FLOOR))
        checks.append(CheckResult("uniform energy bound", bool(ratio <= 1.0 + 1e-12),
                                  ratio, 1.0,
                                  f"max energy / (E0 + C_impl ||P||^2)"))

    mass_rel = ledger.column("mass_update_residual") / np.maximum(
        ledger.column("mass_update_scale"), ENERGY_FLOOR)
    checks.append(CheckResult("mass/geometry update identity", bool(mass_rel.max() <= 1e-13),
                              float(mass_rel.max()), 1e-13))

    skew_rel = ledger.column("advection_skew") / np.maximum(
        ledger.column("advection_scale"), ENERGY_FLOOR)
    checks.append(CheckResult("transport skew-symmetry", bool(skew_rel.max() <= 1e-13),
                              float(skew_rel.max()), 1e-13))

    report = VerdictReport(checks, all(c.passed for c in checks), scale, c_impl,
                           details={"c_needed": c_needed,
                                    "c_ref": float(h.get("c_ref", 0.0))})
    return report
