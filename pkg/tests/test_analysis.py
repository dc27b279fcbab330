import numpy as np
import pytest

from multigrid_ilc.analysis import (
    LinearSystem,
    default_grid,
    linearize_closed_loop,
    linearize_unit,
    observability_report,
    passivity_sweep,
    single_vsc_dc_chain,
    spectral_abscissa,
    transfer_matrix,
)
from multigrid_ilc.errors import SingularResolvent, ValidationError
from multigrid_ilc.scenario import build_system

from test_ilc import CATALOGUE, unit_for


def lag_system(tau):
    return LinearSystem(a=[[-1.0 / tau]], b=[[1.0 / tau]], c=[[1.0]], d=[[0.0]])


class TestTransferMatrix:
    def test_integrator(self):
        lin = LinearSystem(a=[[0.0]], b=[[1.0]], c=[[1.0]], d=[[0.0]])
        assert transfer_matrix(lin, 1.0)[0, 0] == pytest.approx(-1j)

    def test_first_order_lag(self):
        # 1/(tau s + 1) at the corner frequency
        g = transfer_matrix(lag_system(0.05), 20.0)[0, 0]
        assert g == pytest.approx((1 - 1j) / 2)

    def test_high_frequency_approaches_d(self):
        from multigrid_ilc.mg import SwingGovernor, mg_linearize

        for lin in (
            lag_system(0.05),
            mg_linearize(SwingGovernor(M=1e7, D=1e6, T_g=0.3, inv_R=2e7)),
        ):
            g = transfer_matrix(lin, 1e9)
            assert np.max(np.abs(g - lin.d)) < 1e-6
        # large-gain converters decay at the same 1/w rate, scaled by ||C B||
        lin = linearize_unit(unit_for("dual-freq-droop-1"))
        cb = float(np.max(np.abs(lin.c @ lin.b)))
        assert np.max(np.abs(transfer_matrix(lin, 1e9) - lin.d)) < 1.01 * cb / 1e9

    def test_singular_resolvent(self):
        osc = LinearSystem(a=[[0.0, 1.0], [-1.0, 0.0]], b=[[0.0], [1.0]],
                           c=[[1.0, 0.0]], d=[[0.0]])
        with pytest.raises(SingularResolvent):
            transfer_matrix(osc, 1.0)


class TestLinearizeUnit:
    def test_gfl_dc_row(self):
        lin = linearize_unit(unit_for("dual-freq-droop-1"))
        i_v = lin.state_labels.index("vdc")
        i_p1 = lin.state_labels.index("p1")
        assert lin.a[i_v, i_p1] == pytest.approx(-0.1, rel=1e-6)

    def test_partial_angle_gain(self):
        lin = linearize_unit(unit_for("dual-droop-matching"))
        i_eta = lin.state_labels.index("eta")
        # output 1 is -p1 = -B*sin(eta)
        assert lin.c[0, i_eta] == pytest.approx(-unit_for("matching").physical.b,
                                                rel=1e-6)

    def test_gfm_port_convention(self):
        lin = linearize_unit(unit_for("matching"))
        assert lin.input_labels == ("-p1", "-p2")
        assert lin.output_labels == ("omega1", "omega2")
        # input -p1 raises the DC voltage
        assert lin.b[0, 0] > 0


class TestPassivity:
    def test_lag_is_passive(self):
        assert passivity_sweep(lag_system(0.05)).verdict == "passive"

    def test_dfd1_non_passive(self):
        report = passivity_sweep(linearize_unit(unit_for("dual-freq-droop-1")))
        assert report.verdict == "non-passive"
        assert report.negative_diag_tail  # the relative-degree diagnostic

    def test_ddm_passive(self):
        report = passivity_sweep(linearize_unit(unit_for("dual-droop-matching")))
        assert report.verdict == "passive"

    def test_hermitian_eigenvalues_real(self):
        lin = linearize_unit(unit_for("dual-acdc-droop"))
        for w in (0.1, 10.0, 1e3):
            g = transfer_matrix(lin, w)
            h = g + g.conj().T
            eigs = np.linalg.eigvals(h)
            assert np.max(np.abs(eigs.imag)) <= 1e-12 * max(1.0, np.max(np.abs(eigs)))

    @pytest.mark.parametrize("scheme", sorted(CATALOGUE))
    def test_verdict_stable_under_grid_refinement(self, scheme):
        lin = linearize_unit(unit_for(scheme))
        verdicts = {
            passivity_sweep(lin, default_grid(n)).verdict for n in (200, 400, 800)
        }
        assert len(verdicts) == 1

    def test_non_square_rejected(self):
        lin = LinearSystem(a=[[-1.0]], b=[[1.0]], c=[[1.0], [2.0]],
                           d=[[0.0], [0.0]])
        with pytest.raises(ValidationError):
            passivity_sweep(lin)


class TestVscChain:
    def setup_method(self):
        self.unit = unit_for("dual-freq-droop-1")
        self.chain = single_vsc_dc_chain(self.unit)
        self.lin = linearize_unit(self.unit)

    def test_rejects_other_schemes(self):
        with pytest.raises(ValidationError):
            single_vsc_dc_chain(unit_for("matching"))

    def test_dc_bus_gain(self):
        # steady state: -1/(K_dc * V_ref); the bus sheds 1 W through K_dc at
        # a voltage deviation of 1e-4 V
        phys = self.unit.physical
        assert self.chain.p1_to_vdc.evaluate(0.0) == pytest.approx(
            -1.0 / (phys.k_dc * phys.v_dc_ref)
        )

    def test_relative_degree(self):
        assert self.chain.freq_to_p2.relative_degree >= 2

    def test_real_part_goes_negative(self):
        values = self.chain.freq_to_p2.evaluate(1j * default_grid())
        assert np.min(values.real) < 0

    def test_matches_linearization_on_grid(self):
        for w in default_grid(100):
            g = transfer_matrix(self.lin, float(w))
            t21 = self.chain.freq_to_p2.evaluate(1j * w)
            t18 = self.chain.freq_to_p1.evaluate(1j * w)
            assert abs(t21 - g[1, 1]) / abs(g[1, 1]) < 1e-6
            assert abs(t18 - g[0, 1]) / abs(g[0, 1]) < 1e-6

    def test_chain_is_product(self):
        s = 1j * 37.0
        product = (
            self.chain.freq_to_p1.evaluate(s)
            * self.chain.p1_to_vdc.evaluate(s)
            * self.chain.vdc_to_p2.evaluate(s)
        )
        assert product == pytest.approx(self.chain.freq_to_p2.evaluate(s))

    def test_closed_pi_loop_stage(self):
        # Vdc->p2 stage equals the PI loop closed through the bus
        g, phys = self.unit.gains, self.unit.physical
        for w in (0.1, 10.0, 1e3):
            s = 1j * w
            beta = 1.0 / (phys.c * phys.v_dc_ref * s + phys.k_dc * phys.v_dc_ref)
            kappa = (g.k_pdc + g.k_idc / s) / (phys.tau2 * s + 1.0)
            ref = kappa / (1.0 + beta * kappa)
            assert self.chain.vdc_to_p2.evaluate(s) == pytest.approx(ref, rel=1e-12)


class TestObservability:
    def test_identity_output(self):
        lin = LinearSystem(a=np.diag([-1.0, -2.0]), b=[[1.0], [1.0]],
                           c=np.eye(2), d=[[0.0], [0.0]])
        assert observability_report(lin).obs_rank == 2

    def test_ddm_full_rank(self):
        report = observability_report(linearize_unit(unit_for("dual-droop-matching")))
        assert report.n_states == 4
        assert report.obs_rank == 4
        assert report.observable

    def test_unobservable_decoupled_state(self):
        lin = LinearSystem(
            a=np.diag([-1.0, -2.0, -3.0]),
            b=[[1.0], [1.0], [0.0]],
            c=[[1.0, 1.0, 0.0]],
            d=[[0.0]],
        )
        assert observability_report(lin).obs_rank == 2


class TestStabilityEigs:
    def test_lag(self):
        assert spectral_abscissa(lag_system(0.05)) == pytest.approx(-20.0)

    def test_two_mg_ddm_stable(self, two_mg_resolved):
        bundle = build_system(two_mg_resolved)
        assert spectral_abscissa(linearize_closed_loop(bundle.ode)) < 0

    def test_gfm_freq_droop_needs_dc_support(self, scheme_scenario):
        from multigrid_ilc.scenario import set_parameter

        resolved = set_parameter(scheme_scenario("gfm-freq-droop"), "ilc.K_dc", 0.0)
        bundle = build_system(resolved)
        assert spectral_abscissa(linearize_closed_loop(bundle.ode)) >= 0


def test_passivity_csv_full_precision(tmp_path):
    report = passivity_sweep(linearize_unit(unit_for("dual-droop-matching")),
                             default_grid(25))
    path = tmp_path / "sweep.csv"
    report.to_csv(path)
    rows = path.read_text().strip().split("\n")
    assert rows[0] == "omega,min_eig,diag1_re,diag2_re"
    values = np.array([[float(v) for v in row.split(",")] for row in rows[1:]])
    assert np.array_equal(values[:, 0], report.omegas)
    assert np.array_equal(values[:, 1], report.min_eigs)
