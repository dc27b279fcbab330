import math

import numpy as np
import pytest

from multigrid_ilc.analysis import linearize_closed_loop, spectral_abscissa
from multigrid_ilc.engine import (
    IntegrateOptions,
    LoadEvent,
    assemble,
    find_equilibrium,
    integrate,
)
from multigrid_ilc.errors import (
    AngleOutOfRange,
    NewtonDivergence,
    PortMismatch,
    ValidationError,
)
from multigrid_ilc.ilc import Gains, IlcPhysical, IlcUnit
from multigrid_ilc.mg import SwingGovernor
from multigrid_ilc.network import IlcSpec, MgSpec, NetworkSpec, validate_topology
from multigrid_ilc.scenario import build_system


def two_mg_net():
    return validate_topology(
        NetworkSpec(mgs=(MgSpec("MG1"), MgSpec("MG2")), ilcs=(IlcSpec(0, 1),))
    )


def dacd_unit(k_dc=0.0, b=None):
    phys = IlcPhysical(k_dc=k_dc) if b is None else IlcPhysical(k_dc=k_dc, b=b)
    return IlcUnit(
        "dual-acdc-droop",
        phys,
        Gains(k_omega1=2.5e7, k_omega2=2.5e7, k_v1=2.5e4, k_v2=2.5e4,
              k_i1=10.0, k_i2=10.0),
    )


def droop_models():
    # near-zero damping keeps the droop-sharing algebra exact
    return [
        SwingGovernor(M=1e7, D=1e3, T_g=0.3, inv_R=2e7, rating=4e8),
        SwingGovernor(M=5e6, D=1e3, T_g=0.3, inv_R=1e7, rating=2e8),
    ]


def test_assemble_dimension_and_origin():
    ode = assemble(two_mg_net(), droop_models(), [dacd_unit()])
    assert ode.dim == 2 + 2 + 5
    assert ode.derivative(0.0, [0.0] * ode.dim, [0.0, 0.0]) == [0.0] * ode.dim


def test_assemble_port_mismatch():
    with pytest.raises(PortMismatch):
        assemble(two_mg_net(), droop_models()[:1], [dacd_unit()])
    with pytest.raises(PortMismatch):
        assemble(two_mg_net(), droop_models(), [])


def test_droop_sharing_equilibrium():
    """Load step shared in proportion to the total droop coefficients; with a
    lossless DC bus the ILC carries exactly the second MG's contribution."""
    models = droop_models()
    ode = assemble(two_mg_net(), models, [dacd_unit(k_dc=0.0)])
    eq = find_equilibrium(ode, loads=[-1e6, 0.0])
    droop_total = sum(m.D + m.inv_R for m in models)
    w_star = -1e6 / droop_total
    assert abs(w_star - (-1e6 / 3e7)) / abs(w_star) < 1e-3  # near the ideal split
    assert eq.x[ode.column("mg", 0, "omega")] == pytest.approx(w_star, rel=1e-6)
    assert eq.x[ode.column("mg", 1, "omega")] == pytest.approx(w_star, rel=1e-6)
    # power the ILC injects into MG2 equals minus MG2's droop response
    p2 = eq.x[ode.column("ilc", 0, "p2")]
    expected = (models[1].D + models[1].inv_R) * w_star
    assert p2 == pytest.approx(expected, rel=1e-6)
    assert expected == pytest.approx(-3.333e5, rel=1e-3)


def test_find_equilibrium_zero_loads_is_origin():
    ode = assemble(two_mg_net(), droop_models(), [dacd_unit()])
    eq = find_equilibrium(ode)
    assert np.max(np.abs(eq.x)) == 0.0
    assert eq.residual == 0.0


def test_infeasible_transfer_raises():
    # filter limit far below the required transfer
    ode = assemble(two_mg_net(), droop_models(),
                   [IlcUnit("dual-droop-matching", IlcPhysical(b=1e5),
                            Gains(m1=1e-3, k_v2=2.5e4, k_omega2=2.5e7, k_i2=10.0))])
    with pytest.raises((NewtonDivergence, AngleOutOfRange)):
        find_equilibrium(ode, loads=[-1e6, 0.0])


def test_integrate_zero_stays_zero():
    ode = assemble(two_mg_net(), droop_models(), [dacd_unit()])
    traj = integrate(ode, [0.0] * ode.dim, t_span=(0.0, 5.0))
    assert np.max(np.abs(traj.y)) == 0.0
    assert not traj.truncated


def test_tolerance_refinement():
    ode = assemble(two_mg_net(), droop_models(), [dacd_unit(k_dc=1.0)])
    events = (LoadEvent(0.5, 0, -1e6),)
    rtol = 1e-6
    finals = []
    for factor in (1.0, 0.5):
        opts = IntegrateOptions(rtol=rtol * factor, atol_scale=factor)
        traj = integrate(ode, [0.0] * ode.dim, events, (0.0, 10.0), opts)
        finals.append(traj.final_state)
    scale = np.maximum(np.abs(finals[0]), np.abs(ode.state_scales))
    assert np.max(np.abs(finals[0] - finals[1]) / scale) < 10.0 * rtol


def test_event_restart_grid_contains_event_time():
    ode = assemble(two_mg_net(), droop_models(), [dacd_unit()])
    events = (LoadEvent(1.25, 0, -1e5),)
    traj = integrate(ode, [0.0] * ode.dim, events, (0.0, 3.0))
    assert 1.25 in traj.t.tolist()


def test_events_must_be_sorted():
    ode = assemble(two_mg_net(), droop_models(), [dacd_unit()])
    events = (LoadEvent(2.0, 0, -1e5), LoadEvent(1.0, 1, -1e5))
    with pytest.raises(ValidationError):
        integrate(ode, [0.0] * ode.dim, events, (0.0, 3.0))


def test_determinism_bit_identical():
    ode = assemble(two_mg_net(), droop_models(), [dacd_unit(k_dc=1.0)])
    events = (LoadEvent(0.5, 0, -1e6),)
    a = integrate(ode, [0.0] * ode.dim, events, (0.0, 5.0))
    b = integrate(ode, [0.0] * ode.dim, events, (0.0, 5.0))
    assert np.array_equal(a.t, b.t)
    assert np.array_equal(a.y, b.y)


def test_divergence_truncates_with_flag():
    # far past the converter-lag stability boundary
    unit = IlcUnit(
        "dual-freq-droop-1",
        IlcPhysical(tau1=1.0, tau2=1.0),
        Gains(k_omega1=2.5e7, k_omega2=2.5e7, k_i=10.0, k_pdc=2.5e4, k_idc=2.5e5),
    )
    models = [
        SwingGovernor(M=3e7, D=1e4, T_g=0.3, inv_R=4e7, rating=4e8),
        SwingGovernor(M=1.5e7, D=5e3, T_g=0.3, inv_R=2e7, rating=2e8),
    ]
    ode = assemble(two_mg_net(), models, [unit])
    events = (LoadEvent(0.5, 0, -4e6),)
    traj = integrate(ode, [0.0] * ode.dim, events, (0.0, 120.0))
    assert traj.truncated
    assert traj.truncation_reason


def test_post_event_convergence_window(two_mg_resolved):
    """Post-event deviation decays below 1e-4 of its peak within three times
    the window predicted by the slowest closed-loop eigenvalue."""
    bundle = build_system(two_mg_resolved)
    absc = spectral_abscissa(linearize_closed_loop(bundle.ode))
    assert absc < 0
    window = 3.0 * math.log(1e4) / abs(absc)
    t_event = 1.0
    events = (LoadEvent(t_event, 0, -1e6),)
    traj = integrate(bundle.ode, [0.0] * bundle.ode.dim, events,
                     (0.0, t_event + 1.05 * window), bundle.options)
    eq = find_equilibrium(bundle.ode, loads=[-1e6, 0.0], guess=traj.final_state)
    dev = np.max(np.abs(traj.y - eq.x[None, :]) / bundle.ode.state_scales[None, :],
                 axis=1)
    post = traj.t >= t_event
    peak = float(np.max(dev[post]))
    tail = float(dev[-1])
    assert tail < 1e-4 * peak


def test_event_superposition_linearity(two_mg_resolved):
    bundle = build_system(two_mg_resolved)
    ode = bundle.ode

    def response(events):
        traj = integrate(ode, [0.0] * ode.dim, events, (0.0, 8.0), bundle.options)
        return traj

    step = 2e4  # small against the 4e8 rating
    a = response((LoadEvent(1.0, 0, -step),))
    b = response((LoadEvent(1.0, 1, -step),))
    both = response((LoadEvent(1.0, 0, -step), LoadEvent(1.0, 1, -step)))
    grid = np.linspace(1.5, 7.5, 40)
    for j in range(2):
        ya = np.interp(grid, a.t, a.omega(j))
        yb = np.interp(grid, b.t, b.omega(j))
        yc = np.interp(grid, both.t, both.omega(j))
        scale = np.max(np.abs(yc))
        assert np.max(np.abs(yc - (ya + yb))) / scale < 0.01


def test_trajectory_csv_round_trip(tmp_path, two_mg_resolved):
    bundle = build_system(two_mg_resolved)
    traj = integrate(bundle.ode, [0.0] * bundle.ode.dim, bundle.events,
                     (0.0, 2.0), bundle.options)
    path = tmp_path / "traj.csv"
    traj.to_csv(path, pu_base=bundle.omega_nominal)
    rows = path.read_text().strip().split("\n")
    header = rows[0].split(",")
    assert header[:6] == ["t", "mg1.omega", "mg2.omega", "ilc1.p1", "ilc1.p2",
                          "ilc1.vdc"]
    assert "mg1.omega_pu" in header
    data = np.array([[float(v) for v in row.split(",")] for row in rows[1:]])
    assert np.array_equal(data[:, 0], traj.t)
    assert np.array_equal(data[:, 1], traj.omega(0))


def test_dc_energy_bookkeeping(two_mg_resolved):
    """d/dt(C V^2 / 2) must equal the bus power balance along trajectories."""
    bundle = build_system(two_mg_resolved)
    ode = bundle.ode
    unit = bundle.units[0]
    comp = ode.ilc_components[0]
    names = list(comp.state_names)
    vdc_idx = comp.offset + names.index("vdc")
    phys = unit.physical

    class Augmented:
        dim = ode.dim + 1
        state_scales = np.append(ode.state_scales, 1e3)
        state_atols = np.append(ode.state_atols, 1e-3)
        state_names = ode.state_names + ("aux.energy",)
        mg_components = ode.mg_components
        units = ode.units
        net = ode.net
        models = ode.models
        _vdc_index_by_ilc = ode._vdc_index_by_ilc
        _eta_indices = ode._eta_indices

        @staticmethod
        def derivative(t, y, loads=None):
            rates = ode.derivative(t, y[:-1], loads)
            (p1, p2) = ode.connection_powers(y[:-1])[0]
            v = y[vdc_idx]
            flow = -(p1 + p2) * v / (v + phys.v_dc_ref) - phys.k_dc * v * v
            return rates + [flow]

    events = (LoadEvent(1.0, 0, -1e6),)
    traj = integrate(Augmented, [0.0] * Augmented.dim, events, (0.0, 20.0),
                     IntegrateOptions(rtol=1e-8))
    v = traj.y[:, vdc_idx]
    stored = 0.5 * phys.c * v**2
    integrated = traj.y[:, -1]
    scale = np.max(np.abs(stored))
    assert scale > 0
    assert np.max(np.abs(stored - integrated)) / scale < 1e-6


def test_first_order_droop_mg_in_system():
    """A droop-lag MG shares per its droop D like the governor models do."""
    from multigrid_ilc.mg import FirstOrderDroop

    # T/D sets the lag pole: one-second and half-second droop responses
    models = [
        FirstOrderDroop(T=2e7, D=2e7, rating=4e8),
        FirstOrderDroop(T=5e6, D=1e7, rating=2e8),
    ]
    ode = assemble(two_mg_net(), models, [dacd_unit(k_dc=0.0)])
    eq = find_equilibrium(ode, loads=[-1e6, 0.0])
    w_star = -1e6 / 3e7
    assert eq.x[ode.column("mg", 0, "omega")] == pytest.approx(w_star, rel=1e-8)
    traj = integrate(ode, eq.x, (LoadEvent(0.0, 0, -1e6),), t_span=(0.0, 1.0))
    scaled = np.abs(traj.y - eq.x[None, :]) / ode.state_scales[None, :]
    assert np.max(scaled) < 1e-4
