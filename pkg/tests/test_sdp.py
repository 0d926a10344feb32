import json

import numpy as np
import pytest

from seqdim.sdp import (
    ConicProblem,
    CvxoptSolver,
    InteriorPointSolver,
    Solution,
    Tolerances,
    embed_hermitian,
    solve,
    unembed_dual,
)

try:
    import cvxopt  # noqa: F401

    HAVE_CVXOPT = True
except ImportError:
    HAVE_CVXOPT = False

BACKENDS = [InteriorPointSolver()] + ([CvxoptSolver()] if HAVE_CVXOPT else [])


def _random_symmetric(rng, n):
    a = rng.standard_normal((n, n))
    return 0.5 * (a + a.T)


def _feasible_interval(f0, f1, lo=-50.0, hi=50.0, tol=1e-9):
    """Bisection oracle: the set {x : f0 + x f1 >= 0} is an interval."""

    def feasible(x):
        return np.linalg.eigvalsh(f0 + x * f1)[0] >= -1e-12

    assert feasible(0.0)

    def boundary(inner, outer):
        # invariant: inner feasible, outer infeasible
        while abs(outer - inner) > tol:
            mid = 0.5 * (inner + outer)
            if feasible(mid):
                inner = mid
            else:
                outer = mid
        return inner

    upper = hi if feasible(hi) else boundary(0.0, hi)
    lower = lo if feasible(lo) else boundary(0.0, lo)
    return lower, upper


class TestToyProblems:
    def test_offdiagonal_bound(self):
        # [[1, x], [x, 1]] >= 0 iff |x| <= 1
        prob = ConicProblem(c=[1.0], f0=np.eye(2), fs=[np.array([[0.0, 1.0], [1.0, 0.0]])])
        sol = solve(prob)
        assert sol.optimal
        assert sol.objective == pytest.approx(1.0, abs=1e-6)

    def test_equality_pins_variable(self):
        prob = ConicProblem(
            c=[1.0], f0=np.eye(2), fs=[np.array([[0.0, 1.0], [1.0, 0.0]])],
            a=[[1.0]], b=[0.3],
        )
        sol = solve(prob)
        assert sol.optimal
        assert sol.objective == pytest.approx(0.3, abs=1e-8)
        assert sol.x[0] == pytest.approx(0.3, abs=1e-8)

    def test_infeasible_lmi_detected(self):
        # -1 - x^2-style: f0 negative definite and no variable can fix it
        prob = ConicProblem(c=[1.0], f0=-np.eye(2), fs=[np.zeros((2, 2))])
        sol = solve(prob)
        assert sol.status in ("infeasible", "numerical-failure")
        assert not sol.optimal

    def test_unbounded_detected(self):
        # objective increases forever, LMI never binds
        prob = ConicProblem(c=[1.0], f0=np.eye(2), fs=[np.zeros((2, 2))])
        sol = solve(prob)
        assert sol.status in ("unbounded", "numerical-failure")
        assert not sol.optimal

    def test_block_cap_enforced(self):
        big = np.eye(300)
        prob = ConicProblem(c=[1.0], f0=big, fs=[np.zeros((300, 300))])
        with pytest.raises(ValueError):
            InteriorPointSolver().solve(prob)


class TestRandomInstancesAgainstBisectionOracle:
    @pytest.mark.parametrize("backend", BACKENDS, ids=lambda b: type(b).__name__)
    def test_fifty_random_line_sections(self, backend):
        rng = np.random.default_rng(314)
        for trial in range(50):
            n = int(rng.integers(2, 9))
            f1 = _random_symmetric(rng, n)
            f0 = _random_symmetric(rng, n)
            f0 = f0 @ f0.T + 0.1 * np.eye(n)  # strictly feasible at x = 0
            sign = 1.0 if rng.random() < 0.5 else -1.0
            prob = ConicProblem(c=[sign], f0=f0, fs=[f1])
            lower, upper = _feasible_interval(f0, f1)
            expected = upper if sign > 0 else -lower
            if abs(upper) >= 50.0 or abs(lower) >= 50.0:
                continue  # effectively unbounded section; oracle capped
            sol = backend.solve(prob, Tolerances())
            assert sol.optimal, f"trial {trial} failed: {sol.status}"
            assert sol.objective == pytest.approx(expected, abs=1e-5)


class TestSolutionQuality:
    def _random_feasible_problem(self, rng, n_vars=6, nb=7, p=2):
        fs = [_random_symmetric(rng, nb) for _ in range(n_vars)]
        x_feas = rng.standard_normal(n_vars) * 0.3
        base = _random_symmetric(rng, nb)
        base = base @ base.T + 0.5 * np.eye(nb)
        f0 = base - sum(x * f for x, f in zip(x_feas, fs))
        a = rng.standard_normal((p, n_vars))
        b = a @ x_feas
        c = rng.standard_normal(n_vars)
        # bound the objective by penalizing a direction: ensure compact level sets
        # via an extra PSD block diag(t*I - xx') style is overkill; instead cap
        # with a trace-style constraint encoded in the LMI
        cap = np.eye(nb)
        fs = [f - 0.2 * float(c_i) * cap for f, c_i in zip(fs, c)]
        return ConicProblem(c=c, f0=f0 + 5 * np.eye(nb), fs=fs, a=a, b=b)

    def test_weak_duality_and_slackness(self):
        rng = np.random.default_rng(2718)
        solved = 0
        for _ in range(30):
            prob = self._random_feasible_problem(rng)
            sol = solve(prob)
            if not sol.optimal:
                continue
            solved += 1
            fx = np.asarray(prob.f0) + np.tensordot(sol.x, np.stack(prob.fs), axes=1)
            # primal feasibility
            assert np.linalg.eigvalsh(fx)[0] > -1e-8
            assert np.max(np.abs(prob.a @ sol.x - prob.b)) < 1e-8
            # dual PSD and gap
            assert np.linalg.eigvalsh(sol.z)[0] > -1e-8
            assert sol.gap < 1e-7 * (1 + abs(sol.objective))
            # complementary slackness
            assert abs(np.sum(sol.z * fx)) < 1e-6
            # weak duality: primal <= dual for maximization, within gap noise
            dual_obj = float(prob.b @ sol.y) + float(np.sum(np.asarray(prob.f0) * sol.z))
            assert sol.objective <= dual_obj + 1e-6
        assert solved >= 25

    def test_objective_scaling(self):
        tight = Tolerances(feasibility=1e-9, gap=1e-9)
        rng = np.random.default_rng(11)
        prob = self._random_feasible_problem(rng)
        sol1 = solve(prob, tight)
        scaled = ConicProblem(c=3.5 * prob.c, f0=prob.f0, fs=prob.fs, a=prob.a, b=prob.b)
        sol2 = solve(scaled, tight)
        assert sol1.optimal and sol2.optimal
        assert sol2.objective == pytest.approx(3.5 * sol1.objective, abs=1e-6)
        assert np.max(np.abs(sol1.x - sol2.x)) < 1e-6

    def test_determinism(self):
        rng = np.random.default_rng(5)
        prob = self._random_feasible_problem(rng)
        s1 = solve(prob)
        s2 = solve(prob)
        assert s1.objective == s2.objective
        assert np.array_equal(s1.x, s2.x)


class TestEqualityPreprocessing:
    def test_redundant_rows_dropped(self):
        f1 = np.array([[0.0, 1.0], [1.0, 0.0]])
        prob = ConicProblem(
            c=[1.0, 0.0],
            f0=np.eye(2),
            fs=[f1, np.zeros((2, 2))],
            a=[[1.0, 0.0], [2.0, 0.0]],
            b=[0.25, 0.5],
        )
        sol = solve(prob)
        assert sol.optimal
        assert sol.objective == pytest.approx(0.25, abs=1e-8)

    def test_inconsistent_rows_raise(self):
        prob = ConicProblem(
            c=[1.0],
            f0=np.eye(2),
            fs=[np.array([[0.0, 1.0], [1.0, 0.0]])],
            a=[[1.0], [1.0]],
            b=[0.25, 0.5],
        )
        with pytest.raises(ValueError):
            solve(prob)


class TestHermitianEmbedding:
    def test_identity(self):
        assert np.array_equal(embed_hermitian(np.eye(2, dtype=complex)), np.eye(4))

    def test_pauli_y_spectrum(self):
        h = np.array([[0, 1j], [-1j, 0]])
        eigs = np.linalg.eigvalsh(embed_hermitian(h))
        assert np.allclose(eigs, [-1, -1, 1, 1])

    def test_min_eig_preserved(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            n = int(rng.integers(2, 6))
            a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            h = 0.5 * (a + a.conj().T)
            lo_h = np.linalg.eigvalsh(h)[0]
            lo_e = np.linalg.eigvalsh(embed_hermitian(h))[0]
            assert lo_e == pytest.approx(lo_h, abs=1e-10)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            embed_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_unembed_round_trip(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        h = 0.5 * (a + a.conj().T)
        assert np.allclose(unembed_dual(embed_hermitian(h)), h)

    def test_complex_problem_solved_via_embedding(self):
        # maximize -x s.t. 2I + x * PauliY >= 0: optimum at x = -2
        y = np.array([[0, 1j], [-1j, 0]])
        prob = ConicProblem(c=[-1.0], f0=2 * np.eye(2, dtype=complex), fs=[y])
        sol = solve(prob)
        assert sol.optimal
        assert sol.objective == pytest.approx(2.0, abs=1e-6)
        assert np.max(np.abs(sol.z - sol.z.conj().T)) < 1e-9


@pytest.mark.skipif(not HAVE_CVXOPT, reason="cvxopt not installed")
class TestBackendAgreement:
    def test_backends_agree_on_random_problems(self):
        rng = np.random.default_rng(13)
        quality = TestSolutionQuality()
        for _ in range(10):
            prob = quality._random_feasible_problem(rng)
            s_ipm = solve(prob, backend=InteriorPointSolver())
            s_cvx = solve(prob, backend=CvxoptSolver())
            if s_ipm.optimal and s_cvx.optimal:
                assert s_ipm.objective == pytest.approx(s_cvx.objective, abs=1e-5)


class TestProblemDump:
    def test_dump_is_self_describing(self, tmp_path):
        prob = ConicProblem(
            c=[1.0], f0=np.eye(2), fs=[np.array([[0.0, 1.0], [1.0, 0.0]])],
            a=[[1.0]], b=[0.3],
        )
        path = tmp_path / "problem.json"
        prob.dump(path)
        with open(path) as fh:
            data = json.load(fh)
        assert data["format"] == "seqdim-conic-problem"
        assert data["n_vars"] == 1
        assert data["block_size"] == 2
        assert data["A"] == [[1.0]]
        restored = ConicProblem(
            c=data["c"], f0=np.array(data["F0"]), fs=[np.array(f) for f in data["F"]],
            a=data["A"], b=data["b"],
        )
        sol = solve(restored)
        assert sol.objective == pytest.approx(0.3, abs=1e-8)
