import numpy as np
import pytest

from wallflow import ale, coupling, fluid, shell
from wallflow.energy import (LEDGER_COLUMNS, EnergyLedger, EnergyMonitor,
                             discrete_trace_constant, load_ledger, verify_run)
from wallflow.materials import ShellMaterial, derive_coefficients


def build_monitor(n_z=4, n_r=2, length=2.0):
    material = ShellMaterial(youngs_modulus=1.0e5, poisson_ratio=0.5,
                             thickness=0.1, radius=0.5, length=length,
                             density=1.1, viscous_modulus=100.0,
                             viscous_poisson=0.5)
    coeffs = derive_coefficients(material)
    sm = shell.ShellMesh(n_z, length)
    fm = fluid.FluidMesh(n_z, n_r, length)
    cs = coupling.make_setup(fm, sm, coeffs, rho_f=1.0, mu=0.05)
    grams = shell.assemble_grams(sm)
    dt = 1e-3
    return material, coeffs, sm, fm, cs, EnergyMonitor(cs, grams, coeffs, dt), dt


def run_one_step(material, coeffs, sm, fm, cs, monitor, dt, p_in=300.0,
                 p_out=0.0, seed=0):
    rng = np.random.default_rng(seed)
    eta = 0.01 * rng.standard_normal(sm.n_free)
    v = 0.01 * rng.standard_normal(sm.n_free)
    state = shell.ShellState(eta=eta, v=v, v_star=v.copy())
    u = np.zeros(2 * fm.n_velocity_nodes)
    vn = sm.evaluate(sm.to_full(v), fm.velocity_z)
    u[fm.n_velocity_nodes:] = np.outer(fm.velocity_r, vn).ravel()
    half = shell.structure_step(state, dt, cs.shell_mass, cs.shell_elastic,
                                coeffs.rho_s_h)
    snap = ale.build_snapshot(sm, state.eta, fm, material.radius)
    res = coupling.fluid_step(cs, snap, u, half, dt, p_in, p_out)
    mass_old = res.operators["mass"]
    snap_new = ale.build_snapshot(sm, half.eta, fm, material.radius)
    mass_new = fluid.assemble_weighted_mass(fm, snap_new)
    return monitor.record_step(0, state, u, half, res, mass_old, mass_new,
                               p_in, p_out)


def test_zero_states_record_all_zeros():
    material, coeffs, sm, fm, cs, monitor, dt = build_monitor()
    state = shell.ShellState.zeros(sm)
    u = np.zeros(2 * fm.n_velocity_nodes)
    half = shell.structure_step(state, dt, cs.shell_mass, cs.shell_elastic,
                                coeffs.rho_s_h)
    snap = ale.build_snapshot(sm, state.eta, fm, material.radius)
    res = coupling.fluid_step(cs, snap, u, half, dt, 0.0, 0.0)
    mass = res.operators["mass"]
    row = monitor.record_step(0, state, u, half, res, mass, mass, 0.0, 0.0)
    for key in ("e_n", "e_half", "e_full", "d_fluid", "d_shell", "jump_u",
                "jump_v_a2", "jump_v_a1", "pwork", "wall_step_residual",
                "balance_residual"):
        assert row[key] == 0.0


def test_recorded_identities_hold():
    material, coeffs, sm, fm, cs, monitor, dt = build_monitor()
    row = run_one_step(material, coeffs, sm, fm, cs, monitor, dt)
    scale = max(row["e_n"], row["e_half"], row["e_full"])
    assert row["wall_step_residual"] <= 1e-12 * scale
    assert row["balance_residual"] <= 1e-10 * scale
    assert row["jump_u"] >= 0.0 and row["d_fluid"] >= 0.0
    assert row["mass_update_residual"] <= 1e-13 * row["mass_update_scale"]


def test_hand_computed_wall_energy_single_dof():
    # 2-element wall, velocity in the nodal value DOF only, no fluid:
    # assemble the energies from the two element matrices by hand
    material, coeffs, sm, fm, cs, monitor, dt = build_monitor(n_z=2)
    le = sm.length / 2.0
    me, k1e, k2e = shell.hermite_element_matrices(le)
    m00 = me[2, 2] + me[0, 0]
    g1_00 = k1e[2, 2] + k1e[0, 0]
    g2_00 = k2e[2, 2] + k2e[0, 0]
    assert m00 == pytest.approx(2 * 156.0 * le / 420.0, rel=1e-14)
    eta_val, v_val = 0.3, -0.2
    eta = np.array([eta_val, 0.0])
    v = np.array([v_val, 0.0])
    u = np.zeros(2 * fm.n_velocity_nodes)
    mass = fluid.assemble_unweighted_mass(fm)
    e = monitor.total_energy(u, v, eta, mass)
    expected = 0.5 * (coeffs.rho_s_h * v_val**2 * m00
                      + eta_val**2 * (coeffs.C0 * m00 + coeffs.C1 * g1_00
                                      + coeffs.C2 * g2_00))
    assert e == pytest.approx(expected, rel=1e-13)


def make_ledger(rows=3):
    material, coeffs, sm, fm, cs, monitor, dt = build_monitor()
    led = EnergyLedger({"rho_f": 1.0, "mu": 0.05, "rho_s_h": coeffs.rho_s_h,
                        "radius": material.radius, "length": material.length,
                        "dt": dt, "n_steps": rows, "mode": "viscoelastic",
                        "e0": 1.0, "c_ref": 0.5,
                        "p_in_l2_sq": 0.1, "p_out_l2_sq": 0.0})
    for k in range(rows):
        row = run_one_step(material, coeffs, sm, fm, cs, monitor, dt, seed=k)
        row["step"] = k
        led.append(row)
    return led


def test_ledger_round_trip_csv_and_jsonl(tmp_path):
    led = make_ledger()
    csv_path = tmp_path / "ledger.csv"
    jsonl_path = tmp_path / "ledger.jsonl"
    led.to_csv(csv_path)
    led.to_jsonl(jsonl_path)
    for path in (csv_path, jsonl_path):
        back = load_ledger(path)
        assert back.header == led.header
        assert len(back) == len(led)
        for a, b in zip(back.rows, led.rows):
            for col in LEDGER_COLUMNS:
                assert a[col] == b[col], col


def test_round_trip_preserves_verdict(tmp_path):
    led = make_ledger()
    path = tmp_path / "ledger.csv"
    led.to_csv(path)
    original = verify_run(led)
    reloaded = verify_run(load_ledger(path))
    assert original.ok == reloaded.ok
    for a, b in zip(original.checks, reloaded.checks):
        assert a.name == b.name and a.passed == b.passed and a.value == b.value


def test_corrupted_energy_breaks_telescoped_check():
    led = make_ledger()
    # consistent ledger: set e0 so the telescoped identity holds, then break
    e0 = (led.rows[0]["e_half"]
          + 0.5 * (led.header["rho_s_h"] * led.rows[0]["jump_v_a1"]
                   + led.rows[0]["jump_eta_c0"] + led.rows[0]["jump_eta_c1"]
                   + led.rows[0]["jump_eta_c2"]))
    led.header["e0"] = e0
    # rows were generated independently, so stitch them into one telescoping
    # chain by replacing each row's start energy with the previous end
    for k in range(1, len(led.rows)):
        led.rows[k]["e_n"] = led.rows[k - 1]["e_full"]
    # recompute a fake consistent chain is overkill; instead corrupt row 1
    led.rows[1]["e_full"] *= 1.5
    report = verify_run(led)
    tele = [c for c in report.checks if "telescoped" in c.name][0]
    assert not tele.passed


def test_verify_flags_monotonicity_violation():
    led = make_ledger()
    for row in led.rows:
        row["p_in"] = 0.0
        row["p_out"] = 0.0
    led.rows[1]["e_full"] = led.rows[1]["e_half"] * 10.0 + 1.0
    report = verify_run(led)
    mono = [c for c in report.checks if "monotonicity" in c.name][0]
    assert not mono.passed


def test_empty_ledger_verifies_trivially():
    led = EnergyLedger({"rho_s_h": 0.1, "dt": 1.0, "e0": 0.0})
    report = verify_run(led)
    assert report.ok


def test_trace_constant_bounds_the_flux_functional():
    material, coeffs, sm, fm, cs, monitor, dt = build_monitor()
    snap = ale.build_snapshot(sm, sm.zero_free(), fm, material.radius)
    k = fluid.assemble_viscous(fm, snap, 0.05)
    part, t = cs.partition, cs.trace_op
    import scipy.sparse as sp
    k_red = sp.bmat([
        [k[part.free][:, part.free], k[part.free][:, part.top_r] @ t],
        [t.T @ k[part.top_r][:, part.free],
         t.T @ k[part.top_r][:, part.top_r] @ t]], format="csc")
    ell_full = fluid.assemble_pressure_forcing(fm, 1.0, 0.0, 1.0)
    ell_in = np.concatenate([ell_full[part.free], t.T @ ell_full[part.top_r]])
    ell_full = -fluid.assemble_pressure_forcing(fm, 0.0, 1.0, 1.0)
    ell_out = np.concatenate([ell_full[part.free], t.T @ ell_full[part.top_r]])
    c = discrete_trace_constant(k_red, ell_in, ell_out, material.radius)
    assert c > 0.0
    # the defining inequality at random discrete fields
    rng = np.random.default_rng(9)
    for _ in range(5):
        x = rng.standard_normal(k_red.shape[0])
        work = material.radius * (ell_in @ x)   # P_in = 1, P_out = 0
        spare = 0.5 * float(x @ (k_red @ x))
        assert work <= spare + c + 1e-9 * max(1.0, abs(work))
