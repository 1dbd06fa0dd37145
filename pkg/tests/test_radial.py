import io

import numpy as np
import pytest

from attolab.errors import (
    BranchAmbiguityError,
    GridResolutionError,
    ModelError,
    RangeError,
    ValidationError,
)
from attolab.radial import (
    PhaseShiftTable,
    PotentialModel,
    RadialGrid,
    default_radial_grid,
    phase_shift_table,
    scattering_amplitude,
    solve_radial,
    total_cross_section,
    wigner_delay,
)
from attolab.specfun import spherical_bessel

import oracles

SQW = PotentialModel.square_well(-1.0, 1.0)


class TestPotentialModel:
    def test_short_range_tail_checks(self):
        PotentialModel.gaussian_well(-0.5, 3.0).validate()
        PotentialModel.yukawa(1.0, 1.0).validate()
        PotentialModel.soft_core(1.0, 0.8).validate()

    def test_non_decaying_model_rejected(self):
        # a "yukawa" with vanishing screening is a bare Coulomb tail
        # mislabeled as short range
        with pytest.raises(ModelError):
            PotentialModel.yukawa(1.0, 1e-4).validate()

    def test_soft_core_finite_everywhere(self):
        pot = PotentialModel.soft_core(1.0, 0.8)
        r = np.geomspace(1e-6, 100, 50)
        assert np.all(np.isfinite(pot(r)))

    def test_coulomb_plus_short_requires_short_inner(self):
        with pytest.raises(ValidationError):
            PotentialModel.coulomb_plus_short(1.0, PotentialModel.soft_core(1.0, 0.5))


class TestSolveRadial:
    def test_free_particle_phase_and_wavefunction(self):
        pot = PotentialModel.free()
        for l in [0, 1, 3]:
            sol = solve_radial(pot, 1.0, l, "3d")
            assert abs(sol.delta) < 1e-9
            sub = slice(200, None, 400)
            x = sol.r[sub]
            uref = x * spherical_bessel(l, x).regular
            assert np.max(np.abs(sol.u[sub] - uref)) < 1e-6

    @pytest.mark.parametrize("k", [0.3, 0.5, 0.7])
    def test_square_well_closed_form(self, k):
        sol = solve_radial(SQW, k, 0, "3d", grid=RadialGrid(40.0, 0.01))
        ref = oracles.square_well_delta0(k)
        assert abs(np.exp(2j * sol.delta) - np.exp(2j * ref)) < 2e-6

    def test_hard_sphere_limit(self):
        pot = PotentialModel.square_well(1e6, 1.0)
        sol = solve_radial(pot, 1.0, 0, "3d", grid=RadialGrid(40.0, 0.005))
        # delta_0 -> -k a; residual set by barrier penetration ~ k/sqrt(2 V0)
        assert sol.delta == pytest.approx(-1.0, abs=5e-3)

    def test_origin_power_law(self):
        # u ~ r^{nu+1} near the origin, log-slope fit within +-5%
        for mode, channel, expo in [("3d", 0, 1.0), ("3d", 2, 3.0),
                                    ("2d", 0, 0.5), ("2d", 1, 1.5), ("2d", 3, 3.5)]:
            sol = solve_radial(SQW, 1.0, channel, mode, grid=RadialGrid(40.0, 0.002))
            r10, u10 = sol.r[:10], np.abs(sol.u[:10])
            slope = np.polyfit(np.log(r10), np.log(u10), 1)[0]
            assert slope == pytest.approx(expo, rel=0.05)

    def test_2d_free_phase_is_zero(self):
        pot = PotentialModel.free()
        for m in [0, 1, 2, 5]:
            sol = solve_radial(pot, 1.0, m, "2d", grid=RadialGrid(30.0, 2 * np.pi / 2000))
            assert abs(sol.delta) < 1e-8

    def test_yukawa_against_variable_phase(self):
        pot = PotentialModel.yukawa(1.0, 1.0)
        sol = solve_radial(pot, 1.0, 0, "3d", grid=RadialGrid(60.0, 0.005))
        ref = oracles.variable_phase_delta(pot, 1.0)
        assert abs(sol.delta - ref) < 1e-7

    def test_2d_gaussian_well_against_variable_phase(self):
        pot = PotentialModel.gaussian_well(-0.2, 2.0)
        for m in [0, 1, 2]:
            sol = solve_radial(pot, 0.8, m, "2d", grid=RadialGrid(60.0, 0.004))
            ref = oracles.variable_phase_delta(pot, 0.8, mode="2d", channel=m)
            assert abs(np.exp(1j * sol.delta) - np.exp(1j * ref)) < 1e-6

    def test_short_range_asymptotic_residual(self):
        # fitted sin(kr - l pi/2 + delta) matches u at the outermost
        # radii to < 1e-6 relative (validity regime: kr >> l^2)
        sol = solve_radial(SQW, 1.0, 0, "3d", grid=RadialGrid(80.0, 0.005))
        tail = slice(-200, None)
        fit = np.sin(sol.k * sol.r[tail] + sol.delta)
        resid = np.linalg.norm(sol.u[tail] - fit) / np.linalg.norm(fit)
        assert resid < 1e-6

    def test_grid_resolution_error(self):
        with pytest.raises(GridResolutionError):
            solve_radial(SQW, 3.0, 0, "3d", grid=RadialGrid(40.0, 0.2))

    def test_k_floor_enforced(self):
        with pytest.raises(ValidationError):
            solve_radial(SQW, 0.01, 0, "3d", grid=RadialGrid(40.0, 0.01))

    def test_numerov_fourth_order_convergence(self):
        # halving h reduces the delta error by >= 2^4/2 = 8x
        k = 0.5
        ref = oracles.square_well_delta0(k)
        errs = []
        for h in [0.04, 0.02, 0.01]:
            sol = solve_radial(SQW, k, 0, "3d", grid=RadialGrid(30.0, h))
            errs.append(abs(sol.delta - ref))
        assert errs[0] / errs[1] >= 8.0
        assert errs[1] / errs[2] >= 8.0


class TestPhaseShiftTable:
    def test_free_table_is_zero(self):
        pot = PotentialModel.free()
        ks = np.linspace(0.3, 0.7, 11)
        tab = phase_shift_table(pot, 0, ks, "3d", grid=RadialGrid(120.0, 0.02))
        assert np.max(np.abs(tab.delta)) < 1e-10
        assert np.max(np.abs(tab.ddelta_dE)) < 1e-8

    def test_square_well_table_matches_oracle(self):
        ks = np.linspace(0.3, 0.7, 41)
        tab = phase_shift_table(SQW, 0, ks, "3d", grid=RadialGrid(220.0, 0.005))
        ref = np.array([oracles.square_well_delta0(k) for k in ks])
        err = np.abs(np.exp(2j * tab.delta) - np.exp(2j * ref))
        assert np.max(err) < 2e-6

    def test_chain_rule_column_identity(self):
        ks = np.linspace(0.3, 0.7, 21)
        tab = phase_shift_table(SQW, 0, ks, "3d", grid=RadialGrid(120.0, 0.01))
        assert np.allclose(tab.ddelta_dE, tab.ddelta_dk / ks, atol=1e-10)

    def test_continuity_gate(self):
        ks = np.linspace(0.3, 0.7, 21)
        tab = phase_shift_table(SQW, 0, ks, "3d", grid=RadialGrid(120.0, 0.01))
        assert np.max(np.abs(np.diff(tab.delta))) < np.pi / 2

    def test_branch_selection_tie_refused(self):
        from attolab.radial import _continuity

        # candidates delta and delta - pi are equidistant from the
        # previous sample: must request refinement, not guess
        with pytest.raises(BranchAmbiguityError):
            _continuity(np.array([0.0, np.pi / 2 + 2e-4, 1.0]))

    def test_branch_selection_unwraps(self):
        from attolab.radial import _continuity

        raw = np.array([1.4, -1.6, -1.3])  # continuous curve crossing pi/2
        out = _continuity(raw)
        assert np.allclose(out, [1.4, -1.6 + np.pi, -1.3 + np.pi])
        assert np.max(np.abs(np.diff(out))) < np.pi / 2

    def test_validation(self):
        with pytest.raises(ValidationError):
            phase_shift_table(SQW, 0, np.array([0.5, 0.4, 0.6, 0.7, 0.8]), "3d")
        with pytest.raises(ValidationError):
            phase_shift_table(SQW, 0, np.array([0.4, 0.5, 0.6]), "3d")

    def test_csv_round_trip(self):
        ks = np.linspace(0.3, 0.7, 11)
        tab = phase_shift_table(SQW, 0, ks, "3d", grid=RadialGrid(120.0, 0.01))
        buf = io.StringIO()
        tab.to_csv(buf)
        buf.seek(0)
        back = PhaseShiftTable.from_csv(buf)
        assert np.array_equal(back.k_grid, tab.k_grid)
        assert np.array_equal(back.delta, tab.delta)
        assert np.array_equal(back.ddelta_dE, tab.ddelta_dE)
        assert back.coulomb_charge == 0.0

    def test_csv_sigma_column_for_coulomb(self):
        pot = PotentialModel.soft_core(1.0, 0.8)
        ks = np.linspace(0.4, 0.8, 9)
        tab = phase_shift_table(pot, 0, ks, "3d", grid=RadialGrid(140.0, 0.01))
        buf = io.StringIO()
        tab.to_csv(buf)
        text = buf.getvalue()
        assert text.splitlines()[0] == "k,delta,ddelta_dk,ddelta_dE,sigma_coulomb"
        assert text.splitlines()[1].split(",")[4] != ""
        buf.seek(0)
        back = PhaseShiftTable.from_csv(buf)
        assert np.allclose(back.sigma, tab.sigma)


class TestWignerDelay:
    def test_free_is_zero(self):
        pot = PotentialModel.free()
        ks = np.linspace(0.3, 0.7, 11)
        tab = phase_shift_table(pot, 0, ks, "3d", grid=RadialGrid(120.0, 0.02))
        assert abs(wigner_delay(tab, 0.5)) < 1e-8

    def test_square_well_against_analytic_derivative(self):
        # table derivatives are 2nd-order central differences, so the
        # comparison tolerance reflects the dk^2 bias, tightening 4x
        # when the k-grid is refined 2x
        k0 = 0.5
        ref = 2.0 * oracles.square_well_ddelta0_dk(k0) / k0
        errs = []
        for npts in (41, 81):
            ks = np.linspace(0.3, 0.7, npts)
            tab = phase_shift_table(SQW, 0, ks, "3d", grid=RadialGrid(220.0, 0.005))
            errs.append(abs(wigner_delay(tab, k0) - ref))
        assert errs[0] < 2e-3 * abs(ref)
        assert errs[1] < 0.3 * errs[0]

    def test_chain_rule_identity(self):
        ks = np.linspace(0.3, 0.7, 41)
        tab = phase_shift_table(SQW, 0, ks, "3d", grid=RadialGrid(220.0, 0.005))
        k0 = 0.55
        assert wigner_delay(tab, k0) == pytest.approx(
            2.0 * tab.ddelta_dk_at(k0) / k0, rel=1e-9)

    def test_extrapolation_refused(self):
        ks = np.linspace(0.3, 0.7, 11)
        tab = phase_shift_table(SQW, 0, ks, "3d", grid=RadialGrid(120.0, 0.01))
        with pytest.raises(RangeError):
            wigner_delay(tab, 0.9)


class TestCoulombPhases:
    def test_pure_coulomb_has_zero_short_range_remainder(self):
        pot = PotentialModel.coulomb_plus_short(1.0, PotentialModel.free())
        sol = solve_radial(pot, 0.7, 0, "3d", grid=RadialGrid(150.0, 0.01))
        assert abs(sol.delta_hat) < 1e-10
        assert sol.delta == pytest.approx(sol.sigma, abs=1e-10)

    def test_total_phase_decomposition(self):
        from attolab.specfun import gamma_arg

        pot = PotentialModel.soft_core(1.0, 0.8)
        for l, k in [(0, 0.7), (2, 1.1)]:
            sol = solve_radial(pot, k, l, "3d", grid=RadialGrid(150.0, 0.01))
            assert sol.sigma == pytest.approx(gamma_arg(l, -1.0 / k), abs=1e-12)
            assert sol.delta == pytest.approx(sol.sigma + sol.delta_hat, abs=1e-12)

    @pytest.mark.slow
    def test_soft_core_against_mpmath_coulomb_functions(self):
        mp = pytest.importorskip("mpmath")
        pot = PotentialModel.soft_core(1.0, 0.8)
        grid = RadialGrid(180.0, 0.01)
        for l, k in [(0, 0.7), (1, 0.7), (0, 1.3)]:
            sol = solve_radial(pot, k, l, "3d", grid=grid)
            eta = -1.0 / k
            i1 = int(round(150.0 / grid.h)) - 1
            i2 = i1 + int(round((np.pi / 2 / k) / grid.h))
            rows = []
            for i in (i1, i2):
                rr = sol.r[i]
                rows.append((float(mp.coulombf(l, eta, k * rr)),
                             float(mp.coulombg(l, eta, k * rr)), sol.u[i]))
            mat = np.array([[rows[0][0], rows[0][1]], [rows[1][0], rows[1][1]]])
            al, be = np.linalg.solve(mat, np.array([rows[0][2], rows[1][2]]))
            assert sol.delta_hat == pytest.approx(np.arctan2(be, al), abs=1e-5)
            assert np.hypot(al, be) == pytest.approx(1.0, abs=1e-4)


class TestOpticalTheorem:
    def test_yukawa_k1(self):
        # Im f(0) = (k/4 pi) sigma_tot to relative 1e-8, l <= 40
        pot = PotentialModel.yukawa(1.0, 1.0)
        k = 1.0
        grid = RadialGrid(80.0, 0.01)
        deltas = [solve_radial(pot, k, l, "3d", grid=grid).delta for l in range(41)]
        f0 = scattering_amplitude(deltas, k, 0.0, sign=+1)
        sig = total_cross_section(deltas, k)
        assert abs(f0.imag - k * sig / (4 * np.pi)) <= 1e-8 * abs(f0.imag)

    def test_plus_minus_amplitude_relation(self):
        # f^(-)(theta) = conj(f^(+)(pi - theta))
        deltas = [0.5, 0.2, 0.05]
        for theta in [0.0, 0.7, 2.0]:
            fp = scattering_amplitude(deltas, 1.0, np.pi - theta, sign=+1)
            fm = scattering_amplitude(deltas, 1.0, theta, sign=-1)
            assert fm == pytest.approx(np.conj(fp), abs=1e-14)


def test_default_grid_snaps_square_well_edge():
    grid = default_radial_grid(SQW, 0.3, 0.7)
    a = SQW.params[1]
    assert abs(round(a / grid.h) * grid.h - a) < 1e-12
