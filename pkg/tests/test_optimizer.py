import math

import numpy as np
import pytest

from qiscfa.atoms import CANONICAL, build_selection_maps, bayer_grbg
from qiscfa.demosaic import CarrierError, extract_carriers
from qiscfa.lp import LPInfeasible, lp_solve
from qiscfa.metrics import NO_CROSSTALK, chrominance_sensitivity, constraint_residuals
from qiscfa.optimizer import (
    DesignInfeasible,
    DesignProblem,
    build_sca_subproblem,
    latin_hypercube,
    multi_start_design,
    solve_convex_design,
    solve_sca,
)


@pytest.fixture(scope="module")
def problem4():
    return DesignProblem(4, 4)


@pytest.fixture(scope="module")
def sca4(problem4):
    x0 = latin_hypercube(1, 48, 11)[0]
    return solve_sca(problem4, x0)


class TestDesignProblem:
    def test_defaults(self, problem4):
        assert (problem4.lambda_l, problem4.lambda_rho, problem4.tv_max) == (0.1, 0.02, 0.131)
        assert problem4.tv_budget == pytest.approx(0.131 * 32)
        assert problem4.tau_weight == pytest.approx(4.0)

    @pytest.mark.parametrize("kw", [{"lambda_l": -1}, {"lambda_rho": -0.1}, {"tv_max": 0.0}])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            DesignProblem(2, 2, **kw)


class TestLatinHypercube:
    def test_single_point(self):
        p = latin_hypercube(1, 5, 0)
        assert p.shape == (1, 5) and np.all((0 <= p) & (p < 1))

    def test_stratified(self):
        p = latin_hypercube(4, 2, 3)
        for d in range(2):
            assert sorted(np.floor(p[:, d] * 4).astype(int)) == [0, 1, 2, 3]

    def test_deterministic(self):
        np.testing.assert_array_equal(latin_hypercube(8, 6, 42), latin_hypercube(8, 6, 42))


class TestSubproblem:
    def test_cuts_inactive_at_zero(self):
        p = DesignProblem(2, 2)
        lp = build_sca_subproblem(p, np.zeros(12), 0.0)
        rows = lp.info["cut_rows"]
        assert np.abs(lp.A_ub[rows].toarray()).max() == 0
        assert np.all(lp.b_ub[rows] == 0)

    def test_raw_equality_count(self):
        lp = build_sca_subproblem(DesignProblem(2, 2), np.zeros(12), 0.0)
        assert lp.info["raw_equality_rows"] == 2 * 3 + 2 * 2

    def test_feasible_iterate_admits_its_level(self, problem4, sca4):
        x = sca4.atom.x
        tau = chrominance_sensitivity(sca4.atom, CANONICAL)
        lp = build_sca_subproblem(problem4, x, tau * (1 - 1e-9))
        res = lp_solve(lp)
        assert np.isfinite(res.objective)

    def test_value_nonincreasing_in_tau(self, problem4, sca4):
        x = sca4.atom.x
        vals = []
        for t in np.linspace(0, sca4.tau * 0.999, 6):
            vals.append(-lp_solve(build_sca_subproblem(problem4, x, t)).objective)
        assert np.all(np.diff(vals) <= 1e-8)

    def test_rejects_point_outside_box(self):
        with pytest.raises(ValueError):
            build_sca_subproblem(DesignProblem(2, 2), np.full(12, 2.0), 0.1)


class TestSca:
    def test_monotone_and_converged(self, sca4):
        assert sca4.trace.converged
        assert sca4.trace.is_monotone(1e-9)

    def test_gamma_matches_tau(self, sca4):
        assert sca4.gamma_c == pytest.approx(sca4.tau, abs=1e-6)

    def test_constraints(self, sca4):
        r = sca4.residuals
        assert r.uniform_luma < 1e-7 and r.anti_alias < 1e-7 and r.tv_excess < 1e-7 and r.box_violation == 0

    def test_fixed_point(self, problem4, sca4):
        again = solve_sca(problem4, sca4.atom.x)
        assert again.trace.iterations == 1
        assert again.tau == pytest.approx(sca4.tau, abs=1e-6)

    def test_shared_self_conjugate_carrier_is_flagged(self, sca4):
        # The design constraints do not enforce channel separability; this
        # start lands both chromas on (0, 2), which the demosaicker rejects.
        with pytest.raises(CarrierError, match="self-conjugate"):
            extract_carriers(sca4.atom, CANONICAL)

    def test_rejects_bad_start(self, problem4):
        with pytest.raises(ValueError):
            solve_sca(problem4, np.zeros(5))


class TestConvexDesign:
    def test_condat_recovery(self):
        p = DesignProblem(3, 2, enable_tv=False)
        d = solve_convex_design(p, (1, 1))
        assert d.gamma_l == pytest.approx(math.sqrt(3) / 2, abs=1e-6)
        assert d.gamma_c**2 == pytest.approx(0.25, abs=1e-6)

    def test_quadrature_identity(self):
        p = DesignProblem(4, 4, deltas=NO_CROSSTALK, enable_tv=False)
        phi = math.pi / 12
        d = solve_convex_design(p, (2, 2), phi=phi)
        _, Za, Zb = build_selection_maps(CANONICAL, 16)
        m, n = np.divmod(np.arange(16), 4)
        arg = 2 * np.pi * (2 * m / 4 + 2 * n / 4) + phi
        xc, xs = math.sqrt(2) * np.cos(arg), math.sqrt(2) * np.sin(arg)
        np.testing.assert_allclose(Za @ d.atom.x, d.gamma * xc, atol=1e-7)
        np.testing.assert_allclose(Zb @ d.atom.x, d.gamma * xs, atol=1e-7)

    def test_tv_constrained_feasible(self):
        d = solve_convex_design(DesignProblem(4, 4), (2, 2), phi=math.pi / 12)
        assert d.residuals.max() < 1e-7
        assert d.tv <= 0.131 + 1e-7

    def test_infeasible(self):
        p = DesignProblem(4, 4, tv_max=1e-6)
        with pytest.raises(DesignInfeasible):
            solve_convex_design(p, (2, 2), phi=0.0, gamma_min=0.05)
        assert issubclass(DesignInfeasible, LPInfeasible)

    def test_baseband_rejected(self):
        with pytest.raises(ValueError):
            solve_convex_design(DesignProblem(2, 2), (0, 0))


class TestMultiStart:
    def test_single_start_equals_sca(self):
        p = DesignProblem(2, 2)
        ms = multi_start_design(p, 1, seed=5)
        direct = solve_sca(p, latin_hypercube(1, 12, 5)[0])
        np.testing.assert_array_equal(ms.best.atom.x, direct.atom.x)

    def test_parallel_matches_serial(self):
        p = DesignProblem(2, 2)
        a = multi_start_design(p, 3, seed=1, parallelism=1)
        b = multi_start_design(p, 3, seed=1, parallelism=2)
        assert a.best_index == b.best_index
        assert a.best.atom.x.tobytes() == b.best.atom.x.tobytes()

    def test_selection_prefers_chroma(self):
        ms = multi_start_design(DesignProblem(2, 2), 3, seed=2)
        gcs = [r.gamma_c for r in ms.results if r is not None]
        assert ms.best.gamma_c == max(gcs)

    def test_two_by_two_respects_anti_alias(self):
        # Bayer carries alpha at DC, so the anti-alias constraint excludes it.
        p = DesignProblem(2, 2, enable_tv=False)
        ms = multi_start_design(p, 4, seed=0)
        assert ms.best.residuals.anti_alias < 1e-7
        assert constraint_residuals(bayer_grbg(), CANONICAL).anti_alias > 0.1
        assert 0 < ms.best.gamma_c
