"""Dense semidefinite programming with one PSD block and equality constraints.

Problems are stated in linear-matrix-inequality form over free real variables::

    maximize    c' x
    subject to  A x = b
                F0 + sum_i x_i F_i  is positive semidefinite

The bundled solver is a primal-dual path-following interior-point method with
Nesterov-Todd scaling and a Mehrotra predictor-corrector step, using dense
factorizations throughout.  Problem sizes in this package stay small (block
size well under the configured cap), where the dense approach is simple and
robust.  Hermitian (complex) coefficient matrices are accepted and handled
through the real symmetric embedding.

Alternative solvers can be plugged in through the :class:`SolverBackend`
protocol; the bundled method is the default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional, Protocol, Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "ConicProblem",
    "Solution",
    "Tolerances",
    "SolverBackend",
    "InteriorPointSolver",
    "CvxoptSolver",
    "solve",
    "embed_hermitian",
    "unembed_dual",
]

#: Largest admissible PSD block size for the dense solver.
DEFAULT_BLOCK_CAP = 200


def embed_hermitian(matrix: np.ndarray) -> np.ndarray:
    """Real symmetric embedding ``[[Re H, -Im H], [Im H, Re H]]`` of Hermitian H.

    H is positive semidefinite iff the embedding is; every eigenvalue of H
    appears twice in the embedding.
    """
    h = np.asarray(matrix)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    if np.max(np.abs(h - h.conj().T)) > 1e-10:
        raise ValueError("matrix is not Hermitian within 1e-10")
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def unembed_dual(matrix: np.ndarray) -> np.ndarray:
    """Recover a Hermitian dual matrix from its real-embedded counterpart.

    Inverse adjoint of :func:`embed_hermitian` up to the factor two the
    embedding introduces in trace pairings: ``Tr(embed(A) embed(B)) =
    2 Tr(A B)`` for Hermitian A, B.
    """
    z = np.asarray(matrix, dtype=float)
    n = z.shape[0] // 2
    re = 0.5 * (z[:n, :n] + z[n:, n:])
    im = 0.5 * (z[n:, :n] - z[:n, n:])
    return re + 1j * im


@dataclass
class Tolerances:
    """Stopping tolerances for the interior-point method."""

    feasibility: float = 1e-8
    gap: float = 1e-7
    max_iterations: int = 200


@dataclass
class ConicProblem:
    """Maximize ``c' x`` subject to ``A x = b`` and ``F0 + sum x_i F_i >= 0``.

    Coefficient matrices may be real symmetric or complex Hermitian; in the
    latter case the solver works on the real symmetric embedding and returns
    the dual in the original Hermitian space.
    """

    c: np.ndarray
    f0: np.ndarray
    fs: Sequence[np.ndarray]
    a: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = len(self.c)
        if len(self.fs) != n:
            raise ValueError(f"{n} variables but {len(self.fs)} LMI coefficient matrices")
        shape = np.asarray(self.f0).shape
        for i, f in enumerate(self.fs):
            if np.asarray(f).shape != shape:
                raise ValueError(f"LMI coefficient {i} has shape {np.asarray(f).shape}, expected {shape}")
        if (self.a is None) != (self.b is None):
            raise ValueError("equality constraints need both A and b")
        if self.a is not None:
            self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
            self.b = np.asarray(self.b, dtype=float).ravel()
            if self.a.shape != (len(self.b), n):
                raise ValueError(f"A has shape {self.a.shape}, expected ({len(self.b)}, {n})")

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def block_size(self) -> int:
        return np.asarray(self.f0).shape[0]

    def is_complex(self) -> bool:
        return np.iscomplexobj(self.f0) or any(np.iscomplexobj(f) for f in self.fs)

    def dump(self, path) -> None:
        """Write the problem data in a self-describing text format."""
        payload = {
            "format": "seqdim-conic-problem",
            "version": 1,
            "sense": "maximize",
            "description": "maximize c'x subject to Ax=b and F0 + sum_i x_i F_i PSD",
            "n_vars": self.n_vars,
            "block_size": self.block_size,
            "complex": self.is_complex(),
            "c": self.c.tolist(),
            "F0": _matrix_to_lists(self.f0),
            "F": [_matrix_to_lists(f) for f in self.fs],
            "A": self.a.tolist() if self.a is not None else None,
            "b": self.b.tolist() if self.b is not None else None,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)


def _matrix_to_lists(matrix: np.ndarray):
    m = np.asarray(matrix)
    if np.iscomplexobj(m):
        return [[[float(z.real), float(z.imag)] for z in row] for row in m]
    return m.tolist()


@dataclass
class Solution:
    """Result of a conic solve.

    ``z`` is the dual matrix of the LMI and ``y`` the multipliers of the
    equality constraints; ``gap`` is the absolute primal-dual objective
    difference at termination.
    """

    status: str  # optimal | infeasible | unbounded | numerical-failure
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    z: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    gap: Optional[float] = None
    iterations: int = 0
    trace: List[dict] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class SolverBackend(Protocol):
    """Anything that can solve a :class:`ConicProblem` to the given tolerances."""

    def solve(self, problem: ConicProblem, tolerances: Tolerances) -> Solution: ...


def _clean_equalities(a: np.ndarray, b: np.ndarray):
    """Drop linearly dependent equality rows, checking they are consistent."""
    if a.shape[0] == 0:
        return a, b
    q, r, piv = scipy.linalg.qr(a.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(a.shape) * np.finfo(float).eps * (diag[0] if len(diag) else 1.0)
    rank = int(np.sum(diag > tol))
    if rank == a.shape[0]:
        return a, b
    keep = piv[:rank]
    a_red, b_red = a[keep], b[keep]
    # consistency: the dropped rows must be implied by the kept ones
    coeffs, *_ = np.linalg.lstsq(a_red.T, a.T, rcond=None)
    if np.max(np.abs(coeffs.T @ b_red - b)) > 1e-8 * (1 + np.max(np.abs(b))):
        raise ValueError("equality constraints are rank deficient and inconsistent")
    return a_red, b_red


class InteriorPointSolver:
    """Primal-dual NT-scaled path-following method with Mehrotra corrector."""

    def __init__(self, block_cap: int = DEFAULT_BLOCK_CAP):
        self.block_cap = block_cap

    def solve(self, problem: ConicProblem, tolerances: Optional[Tolerances] = None) -> Solution:
        tol = tolerances or Tolerances()
        if problem.is_complex():
            real_problem = ConicProblem(
                c=problem.c,
                f0=embed_hermitian(problem.f0),
                fs=[embed_hermitian(f) for f in problem.fs],
                a=problem.a,
                b=problem.b,
            )
            sol = self._solve_real(real_problem, tol)
            if sol.z is not None:
                sol.z = unembed_dual(sol.z)
            return sol
        return self._solve_real(problem, tol)

    # -- internals ---------------------------------------------------------

    def _solve_real(self, problem: ConicProblem, tol: Tolerances) -> Solution:
        # normalizing the objective makes the iteration covariant under
        # positive rescaling of c (identical iterates, rescaled duals);
        # objectives, gaps and duals are reported in original units
        c_scale = float(np.max(np.abs(problem.c))) if problem.n_vars else 0.0
        if c_scale <= 0:
            c_scale = 1.0
        nb = problem.block_size
        if nb > self.block_cap:
            raise ValueError(f"PSD block size {nb} exceeds cap {self.block_cap}")
        n = problem.n_vars
        c = problem.c / c_scale
        f0 = np.asarray(problem.f0, dtype=float)
        f0 = 0.5 * (f0 + f0.T)
        fstack = np.stack([0.5 * (np.asarray(f, dtype=float) + np.asarray(f, dtype=float).T) for f in problem.fs])
        fmat = fstack.reshape(n, nb * nb)

        if problem.a is not None:
            a, b = _clean_equalities(problem.a, problem.b)
        else:
            a = np.zeros((0, n))
            b = np.zeros(0)
        p = a.shape[0]

        scale = max(1.0, np.linalg.norm(f0, "fro") / max(1, nb), np.max(np.abs(c)))
        x = np.zeros(n)
        y = np.zeros(p)
        s = np.eye(nb) * scale
        z = np.eye(nb) * scale

        trace: List[dict] = []
        best: Optional[Solution] = None
        best_merit = np.inf
        stall = 0
        norm_b = 1.0 + (np.max(np.abs(b)) if p else 0.0)
        norm_c = 1.0 + np.max(np.abs(c)) if n else 1.0
        norm_f0 = 1.0 + np.linalg.norm(f0, "fro")

        def finish(candidate: Optional[Solution]) -> Solution:
            if candidate is not None and candidate.status == "optimal":
                candidate.trace = trace
                return candidate
            failure = candidate or Solution(status="numerical-failure")
            failure.status = "numerical-failure"
            failure.trace = trace
            return failure

        for it in range(tol.max_iterations):
            fx = f0 + np.tensordot(x, fstack, axes=1)
            r_lmi = fx - s
            r_p = b - a @ x if p else np.zeros(0)
            r_d = c - (a.T @ y if p else 0.0) + fmat @ z.ravel()
            mu = float(np.sum(s * z)) / nb

            pobj = c_scale * float(c @ x)
            dobj = c_scale * (float(b @ y) + float(np.sum(f0 * z)) if p else float(np.sum(f0 * z)))
            gap = abs(pobj - dobj)
            pinf = (np.max(np.abs(r_p)) / norm_b if p else 0.0)
            pinf = max(pinf, np.linalg.norm(r_lmi, "fro") / norm_f0)
            dinf = np.max(np.abs(r_d)) / norm_c if n else 0.0
            rel_gap = gap / (1.0 + abs(pobj))
            trace.append({"iter": it, "mu": mu, "pinf": float(pinf), "dinf": float(dinf),
                          "gap": float(gap), "pobj": pobj, "dobj": dobj})

            if pinf < tol.feasibility and dinf < tol.feasibility and rel_gap < tol.gap:
                return Solution(status="optimal", x=x.copy(), objective=pobj,
                                z=c_scale * z, y=c_scale * y, gap=gap,
                                iterations=it, trace=trace)
            merit = max(pinf / tol.feasibility, dinf / tol.feasibility, rel_gap / tol.gap)
            if merit < 0.95 * best_merit:
                stall = 0
            else:
                stall += 1
            if merit < best_merit:
                best = Solution(status="numerical-failure", x=x.copy(), objective=pobj,
                                z=c_scale * z, y=c_scale * y, gap=gap, iterations=it)
                best_merit = merit
            # no usable progress for a while, or the iterates have begun to
            # deteriorate: settle for the best point seen
            if stall >= 8 or merit > 1e4 * best_merit:
                return finish(best)

            divergence = self._detect_divergence(problem, x, y, z, pobj, dobj, pinf, dinf, scale)
            if divergence is not None:
                divergence.trace = trace
                divergence.iterations = it
                return divergence

            try:
                step = self._newton_step(a, b, c, fstack, fmat, x, y, s, z,
                                         r_lmi, r_p, r_d, mu, nb, n, p)
            except np.linalg.LinAlgError:
                return finish(best)
            dx, dy, ds, dz, alpha_p, alpha_d = step
            if min(alpha_p, alpha_d) < 1e-13:
                return finish(best)
            x = x + alpha_p * dx
            s = s + alpha_p * ds
            y = y + alpha_d * dy if p else y
            z = z + alpha_d * dz
            s = 0.5 * (s + s.T)
            z = 0.5 * (z + z.T)

        return finish(best)

    def _newton_step(self, a, b, c, fstack, fmat, x, y, s, z, r_lmi, r_p, r_d, mu, nb, n, p):
        # Nesterov-Todd scaling point: W Z W = S, computed from S = Ls Ls'.
        ls = np.linalg.cholesky(s + 1e-14 * np.trace(s) / nb * np.eye(nb))
        m = ls.T @ z @ ls
        m = 0.5 * (m + m.T)
        lam2, q = np.linalg.eigh(m)
        lam2 = np.maximum(lam2, 1e-300)
        root = ls @ q
        w = root @ np.diag(lam2 ** -0.5) @ root.T          # NT scaling matrix
        w_half, w_half_inv = _sym_sqrt(w)
        lam = w_half_inv @ s @ w_half_inv                  # scaled point, = W^1/2 Z W^1/2
        lam = 0.5 * (lam + lam.T)
        lam_w, lam_q = np.linalg.eigh(lam)
        lam_w = np.maximum(lam_w, 1e-300)
        denom = 0.5 * (lam_w[:, None] + lam_w[None, :])

        # scaled coefficients G_i = W^-1/2 F_i W^-1/2; the Schur complement is
        # their Gram matrix, which avoids the cancellation the unscaled
        # products suffer on ill-conditioned endgame iterations
        gstack = np.matmul(np.matmul(w_half_inv[None, :, :], fstack), w_half_inv)
        gmat = gstack.reshape(n, nb * nb)
        h = gmat @ gmat.T
        h = 0.5 * (h + h.T)
        if not np.all(np.isfinite(h)):
            raise np.linalg.LinAlgError("scaling matrix overflowed")

        # augmented KKT system with iterative refinement; LU with pivoting
        # stays accurate on the badly conditioned endgame iterations
        kkt = np.zeros((n + p, n + p))
        kkt[:n, :n] = h
        # tiny ridge keeps the system solvable when a variable decouples
        kkt[:n, :n][np.diag_indices(n)] += 1e-13 * (1.0 + np.trace(h) / max(1, n))
        if p:
            kkt[:n, n:] = a.T
            kkt[n:, :n] = a
        kkt_lu = scipy.linalg.lu_factor(kkt, check_finite=False)

        def solve_reduced(g, r_p_cur):
            rhs = np.concatenate([g, r_p_cur])
            sol = scipy.linalg.lu_solve(kkt_lu, rhs, check_finite=False)
            for _ in range(2):
                resid = rhs - kkt @ sol
                sol = sol + scipy.linalg.lu_solve(kkt_lu, resid, check_finite=False)
            return sol[:n], sol[n:]

        def solve_kkt(rhs_c_scaled, r_p_cur, r_d_cur, r_lmi_cur):
            # dS + W dZ W = W^1/2 C W^1/2 with C solving the Lyapunov system.
            cmat = lam_q @ ((lam_q.T @ rhs_c_scaled @ lam_q) / denom) @ lam_q.T
            r_lmi_scaled = w_half_inv @ r_lmi_cur @ w_half_inv
            g = r_d_cur + gmat @ (cmat - r_lmi_scaled).ravel()
            dx, dy = solve_reduced(g, r_p_cur)
            ds = np.tensordot(dx, fstack, axes=1) + r_lmi_cur
            ds_scaled = w_half_inv @ ds @ w_half_inv
            dz = w_half_inv @ (cmat - ds_scaled) @ w_half_inv
            dz = 0.5 * (dz + dz.T)
            ds = 0.5 * (ds + ds.T)
            return dx, dy, ds, dz

        # Predictor (affine scaling, sigma = 0): target lambda^2 -> 0.
        rhs_aff = -(lam @ lam)
        dx_a, dy_a, ds_a, dz_a = solve_kkt(rhs_aff, r_p, r_d, r_lmi)
        ap = _max_step(s, ds_a)
        ad = _max_step(z, dz_a)
        mu_aff = float(np.sum((s + ap * ds_a) * (z + ad * dz_a))) / nb
        sigma = min(1.0, max(mu_aff / mu, 0.0) ** 3)

        # Corrector: second-order term in the scaled space, dropped if it is
        # wildly out of scale (badly centered iterates overflow it).
        with np.errstate(over="ignore", invalid="ignore"):
            dsh = w_half_inv @ ds_a @ w_half_inv
            dzh = w_half @ dz_a @ w_half
            corr = 0.5 * (dsh @ dzh + dzh @ dsh)
        if not np.all(np.isfinite(corr)) or np.linalg.norm(corr, "fro") > 1e8 * (1 + mu * nb):
            corr = np.zeros_like(corr)
            sigma = max(sigma, 0.5)
        rhs_cor = sigma * mu * np.eye(nb) - lam @ lam - corr
        dx, dy, ds, dz = solve_kkt(rhs_cor, r_p, r_d, r_lmi)

        alpha_p = min(1.0, 0.99 * _max_step(s, ds))
        alpha_d = min(1.0, 0.99 * _max_step(z, dz))
        if not (np.all(np.isfinite(ds)) and np.all(np.isfinite(dz)) and np.all(np.isfinite(dx))):
            raise np.linalg.LinAlgError("non-finite search direction")
        return dx, dy, ds, dz, alpha_p, alpha_d

    def _detect_divergence(self, problem, x, y, z, pobj, dobj, pinf, dinf, scale):
        # Pragmatic ray detection; the certification workloads never hit these
        # branches, but malformed user input can.
        big = 1e12 * scale
        if pobj > big and pinf < 1e-6:
            return Solution(status="unbounded", x=x.copy(), objective=float("inf"))
        if dobj < -big and dinf < 1e-6:
            return Solution(status="infeasible", y=y.copy(), z=z.copy())
        if max(np.max(np.abs(x)) if len(x) else 0.0, np.max(np.abs(z))) > 1e14 * scale:
            return Solution(status="numerical-failure", x=x.copy(), z=z.copy())
        return None


def _sym_sqrt(mat: np.ndarray):
    w, v = np.linalg.eigh(mat)
    w = np.maximum(w, 1e-300)
    root = v @ np.diag(np.sqrt(w)) @ v.T
    inv_root = v @ np.diag(1.0 / np.sqrt(w)) @ v.T
    return root, inv_root


def _chol_with_ridge(h: np.ndarray):
    ridge = 0.0
    base = np.trace(h) / max(1, h.shape[0])
    for _ in range(6):
        try:
            return scipy.linalg.cho_factor(h + ridge * np.eye(h.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            ridge = max(ridge * 100, 1e-14 * base)
    raise np.linalg.LinAlgError("Schur complement not positive definite")


def _max_step(mat: np.ndarray, dmat: np.ndarray) -> float:
    """Largest alpha with mat + alpha * dmat still PSD (mat assumed PD)."""
    try:
        eigs = scipy.linalg.eigh(
            dmat, mat + 1e-14 * np.trace(mat) / mat.shape[0] * np.eye(mat.shape[0]),
            eigvals_only=True, check_finite=False,
        )
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        return 0.0
    eig_min = eigs[0]
    if eig_min >= 0:
        return 1.0
    return min(1.0, -1.0 / eig_min)


class CvxoptSolver:
    """Adapter running the same problems through CVXOPT's conic solver.

    Exists to exercise the pluggable-backend contract; requires the optional
    ``cvxopt`` dependency.
    """

    def solve(self, problem: ConicProblem, tolerances: Optional[Tolerances] = None) -> Solution:
        import cvxopt

        tol = tolerances or Tolerances()
        if problem.is_complex():
            prob = ConicProblem(
                c=problem.c,
                f0=embed_hermitian(problem.f0),
                fs=[embed_hermitian(f) for f in problem.fs],
                a=problem.a,
                b=problem.b,
            )
            sol = self.solve(prob, tol)
            if sol.z is not None:
                sol.z = unembed_dual(sol.z)
            return sol

        nb = problem.block_size
        n = problem.n_vars
        # cvxopt sdp solves: minimize c'x s.t. Gx + s = h, s PSD-vectorized
        gl = np.zeros((0, n))
        hl = np.zeros(0)
        gs = [cvxopt.matrix(np.stack([-np.asarray(f, dtype=float).ravel() for f in problem.fs]).T)]
        hs = [cvxopt.matrix(np.asarray(problem.f0, dtype=float))]
        kwargs = {}
        if problem.a is not None and problem.a.shape[0]:
            a_red, b_red = _clean_equalities(problem.a, problem.b)
            kwargs["A"] = cvxopt.matrix(a_red)
            kwargs["b"] = cvxopt.matrix(b_red)
        cvxopt.solvers.options["show_progress"] = False
        cvxopt.solvers.options["abstol"] = tol.gap
        cvxopt.solvers.options["reltol"] = tol.gap
        cvxopt.solvers.options["feastol"] = tol.feasibility
        result = cvxopt.solvers.sdp(
            cvxopt.matrix(-problem.c), Gl=cvxopt.matrix(gl), hl=cvxopt.matrix(hl),
            Gs=gs, hs=hs, **kwargs
        )
        status = result["status"]
        if status != "optimal":
            mapped = {"primal infeasible": "infeasible", "dual infeasible": "unbounded"}.get(
                status, "numerical-failure"
            )
            return Solution(status=mapped)
        x = np.array(result["x"]).ravel()
        z = np.array(result["zs"][0]).reshape(nb, nb)
        y = np.array(result["y"]).ravel() if "A" in kwargs else np.zeros(0)
        pobj = float(problem.c @ x)
        dobj = -float(result["dual objective"])
        return Solution(status="optimal", x=x, objective=pobj, z=z, y=y,
                        gap=abs(pobj - dobj), iterations=result.get("iterations", 0))


_DEFAULT_SOLVER = InteriorPointSolver()


def solve(problem: ConicProblem, tolerances: Optional[Tolerances] = None,
          backend: Optional[SolverBackend] = None) -> Solution:
    """Solve a conic problem with the given backend (bundled IPM by default)."""
    backend = backend or _DEFAULT_SOLVER
    return backend.solve(problem, tolerances or Tolerances())
