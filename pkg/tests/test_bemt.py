import math

import numpy as np
import pytest

from hapalloc.bemt import (
    KP_FLOOR,
    PropellerSpec,
    SectionError,
    axial_induction,
    default_test_propeller,
    load_spec_dir,
    propeller_performance,
    solve_section,
    tip_loss,
    write_spec_dir,
)
from hapalloc.config import isa_properties

SPEC = default_test_propeller()
ATM = isa_properties(20000.0)


def section_residual(spec, state, v0, n_s):
    """Substitute a returned state back into the induction balance."""
    phi = math.atan2(v0 * (1.0 + state.a_a), 2.0 * math.pi * n_s * state.r)
    return abs(axial_induction(state.sigma, phi, state.cl, state.cd, state.k_p) - state.a_a)


class TestTipLoss:
    def test_tip_limit_is_zero(self):
        assert tip_loss(3, 3.0, 3.0, 0.3) == 0.0

    def test_reference_point(self):
        import mpmath as mp

        mp.mp.dps = 40
        arg = -mp.mpf(3) * mp.mpf("1.5") / (2 * mp.mpf("1.5") * mp.sin(mp.mpf("0.3")))
        oracle = float(2 / mp.pi * mp.acos(mp.e**arg))
        assert tip_loss(3, 1.5, 3.0, 0.3) == pytest.approx(oracle, rel=1e-13)

    def test_many_blade_asymptote(self):
        assert tip_loss(50, 1.5, 3.0, 0.3) > 0.99

    def test_input_validation(self):
        with pytest.raises(ValueError):
            tip_loss(3, 0.0, 3.0, 0.3)
        with pytest.raises(ValueError):
            tip_loss(3, 1.0, 3.0, 2.0)


class TestAxialInduction:
    def test_bracket_equals_two_gives_unity(self):
        # arrange sigma * force = 2 k_p sin^2(phi)
        phi, k_p, sigma, cd = 0.3, 0.9, 0.1, 0.0
        cl = 2.0 * k_p * math.sin(phi) ** 2 / (sigma * math.cos(phi))
        assert axial_induction(sigma, phi, cl, cd, k_p) == pytest.approx(1.0, rel=1e-14)

    def test_reference_point(self):
        got = axial_induction(0.1, 0.25, 0.8, 0.02, 0.95)
        assert got == pytest.approx(0.49505519691, rel=1e-10)

    def test_non_propulsive_rejected(self):
        phi = 0.4
        cd = 1.0
        cl = cd * math.tan(phi)  # force exactly zero
        with pytest.raises(SectionError):
            axial_induction(0.1, phi, cl, cd, 0.9)


class TestSolveSection:
    def test_mid_blade_reference_case(self):
        st = solve_section(SPEC, 10.0, 5.0, 0.7 * 3.0)
        assert 0.0 < st.a_a < 0.5
        assert section_residual(SPEC, st, 10.0, 5.0) < 1e-6

    def test_matches_independent_bisection(self):
        v0, n_s, r = 10.0, 5.0, 2.1
        st = solve_section(SPEC, v0, n_s, r)
        # oracle: bisect the scalar residual a - a_alg(phi(a)) on a bracket
        theta = SPEC.pitch_fn(r)
        sigma = SPEC.n_blades * SPEC.chord_fn(r) / (2 * math.pi * r)
        phi0 = math.atan2(v0, 2 * math.pi * n_s * r)
        k_p = tip_loss(SPEC.n_blades, r, SPEC.r_tip, phi0)

        def resid(a):
            phi = math.atan2(v0 * (1 + a), 2 * math.pi * n_s * r)
            cl, cd = SPEC.polar(theta - phi)
            return a - axial_induction(sigma, phi, cl, cd, k_p)

        lo, hi = 0.2, 0.6
        assert resid(lo) < 0 < resid(hi)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if resid(mid) < 0:
                lo = mid
            else:
                hi = mid
        assert st.a_a == pytest.approx(0.5 * (lo + hi), abs=1e-5)

    def test_residual_small_across_span_and_operating_points(self):
        for v0, n_s in ((5.0, 12.0), (10.0, 12.0), (15.0, 12.0), (10.0, 5.0)):
            for r in np.linspace(SPEC.r_hub, SPEC.r_tip, 60):
                if v0 == 10.0 and n_s == 5.0 and r < 0.45:
                    continue  # root leaves the propulsive regime at this advance ratio
                st = solve_section(SPEC, v0, n_s, float(r))
                if st.k_p < KP_FLOOR:
                    continue
                assert section_residual(SPEC, st, v0, n_s) < 1e-6

    def test_tip_returns_unloaded_boundary_state(self):
        st = solve_section(SPEC, 10.0, 5.0, SPEC.r_tip)
        assert st.k_p == 0.0
        assert st.a_a == 0.0

    def test_near_tip_sections_converge(self):
        for r in (2.97, 2.999, 2.99999):
            st = solve_section(SPEC, 10.0, 5.0, r)
            assert section_residual(SPEC, st, 10.0, 5.0) < 1e-6

    def test_non_propulsive_root_raises(self):
        # at this advance ratio the root twist sits below the inflow angle
        with pytest.raises(SectionError):
            solve_section(SPEC, 10.0, 5.0, 0.31)

    def test_out_of_span_rejected(self):
        with pytest.raises(ValueError):
            solve_section(SPEC, 10.0, 5.0, 3.5)


class TestPropellerPerformance:
    def test_efficiency_is_thrust_speed_over_power(self):
        op = propeller_performance(SPEC, 10.0, 12.0, ATM)
        assert op.eta_p == pytest.approx(op.thrust * op.v0 / op.shaft_power, rel=1e-14)
        assert 0.0 < op.eta_p < 1.0

    def test_quadrature_halving_changes_little(self):
        full = propeller_performance(SPEC, 10.0, 12.0, ATM, n_nodes=101)
        half = propeller_performance(SPEC, 10.0, 12.0, ATM, n_nodes=51)
        assert abs(full.thrust - half.thrust) / full.thrust < 1e-3
        assert abs(full.shaft_power - half.shaft_power) / full.shaft_power < 1e-3

    def test_richardson_node_doubling(self):
        base = propeller_performance(SPEC, 10.0, 12.0, ATM, n_nodes=101)
        fine = propeller_performance(SPEC, 10.0, 12.0, ATM, n_nodes=201)
        assert abs(base.thrust - fine.thrust) / base.thrust < 1e-3
        assert abs(base.shaft_power - fine.shaft_power) / base.shaft_power < 1e-3

    def test_independent_quadrature_oracle(self):
        # trapezoid rule at 4x the node count, same tip-clustered substitution
        op = propeller_performance(SPEC, 10.0, 12.0, ATM, n_nodes=101)
        span = SPEC.r_tip - SPEC.r_hub
        u = np.linspace(0.0, 1.0, 405)
        ft, fp = [], []
        for ui in u:
            r = min(max(SPEC.r_tip - span * ui * ui, SPEC.r_hub), SPEC.r_tip)
            st = solve_section(SPEC, 10.0, 12.0, float(r))
            if st.k_p < KP_FLOOR:
                ft.append(0.0)
                fp.append(0.0)
                continue
            common = SPEC.chord_fn(r) * (1 + st.a_a) ** 2 / math.sin(st.phi) ** 2
            jac = 2.0 * span * ui
            ft.append((st.cl * math.cos(st.phi) - st.cd * math.sin(st.phi)) * common * jac)
            fp.append((st.cl * math.sin(st.phi) + st.cd * math.cos(st.phi)) * common * st.r * jac)
        thrust = 0.5 * ATM.rho * 100.0 * 3 * np.trapezoid(ft, u)
        power = math.pi * 12.0 * ATM.rho * 100.0 * 3 * np.trapezoid(fp, u)
        assert op.thrust == pytest.approx(thrust, rel=1e-4)
        assert op.shaft_power == pytest.approx(power, rel=1e-4)

    def test_drag_lowers_efficiency(self):
        def polar_with_cd(cd_const):
            def polar(a):
                return 2.0 * math.pi * math.sin(a) * math.cos(a), cd_const
            return polar

        clean = PropellerSpec(3, SPEC.r_hub, SPEC.r_tip, SPEC.chord_fn, SPEC.pitch_fn, polar_with_cd(0.0))
        draggy = PropellerSpec(3, SPEC.r_hub, SPEC.r_tip, SPEC.chord_fn, SPEC.pitch_fn, polar_with_cd(0.02))
        eta_clean = propeller_performance(clean, 10.0, 12.0, ATM).eta_p
        eta_draggy = propeller_performance(draggy, 10.0, 12.0, ATM).eta_p
        assert eta_clean > eta_draggy

    def test_efficiency_rises_then_flattens(self):
        etas = [propeller_performance(SPEC, v, 12.0, ATM).eta_p for v in (5.0, 10.0, 15.0)]
        assert etas[0] < etas[1] < etas[2]
        assert etas[2] - etas[1] < etas[1] - etas[0]  # growth slows toward the plateau

    def test_thrust_falls_as_advance_ratio_rises(self):
        thrusts = [propeller_performance(SPEC, v, 12.0, ATM).thrust for v in (5.0, 10.0, 15.0)]
        assert thrusts[0] > thrusts[1] > thrusts[2]

    def test_section_loading_collapses_toward_windmill(self):
        loads = []
        for v0 in (16.0, 19.0, 22.0):
            st = solve_section(SPEC, v0, 5.0, 0.85 * 3.0)
            loads.append(
                (st.cl * math.cos(st.phi) - st.cd * math.sin(st.phi))
                * (1 + st.a_a) ** 2 / math.sin(st.phi) ** 2
            )
        assert loads[0] > loads[1] > loads[2] > 0.0

    def test_even_node_count_rejected(self):
        with pytest.raises(ValueError):
            propeller_performance(SPEC, 10.0, 12.0, ATM, n_nodes=100)

    def test_section_errors_propagate(self):
        with pytest.raises(SectionError):
            propeller_performance(SPEC, 10.0, 5.0, ATM)


class TestSpecDirIo:
    def test_round_trip_matches_analytic_spec(self, tmp_path):
        write_spec_dir(tmp_path / "prop", SPEC)
        loaded = load_spec_dir(tmp_path / "prop")
        a = propeller_performance(SPEC, 10.0, 12.0, ATM)
        b = propeller_performance(loaded, 10.0, 12.0, ATM)
        assert b.thrust == pytest.approx(a.thrust, rel=2e-3)
        assert b.eta_p == pytest.approx(a.eta_p, rel=2e-3)

    def test_bad_header_rejected(self, tmp_path):
        d = tmp_path / "prop"
        write_spec_dir(d, SPEC)
        (d / "polar.csv").write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError):
            load_spec_dir(d)
