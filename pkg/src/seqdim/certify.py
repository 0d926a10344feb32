"""Certification programs: moment-matrix optimization, robustness, witnesses.

Three semidefinite programs drive the certification workflow:

* :func:`max_unrestricted` maximizes a linear functional of the behavior over
  all positive semidefinite moment matrices obeying the projector-algebra
  equality classes, with no dimension restriction.
* :func:`max_finite` maximizes the same kind of functional over the span of
  sampled d-dimensional level-k moment matrices.
* :func:`robustness` computes the generalized-robustness visibility of a
  behavior against the level-k outer approximation of the d-dimensional set,
  and extracts a dimension witness from the dual multipliers.
  :func:`dual_direct` solves the witness program explicitly as an
  independent cross-check.

All programs are solved over the real symmetric section of the relevant
span.  The span of moment matrices is closed under transposition (the
entrywise conjugate of a moment matrix is the moment matrix of the
conjugated realization), so replacing a feasible matrix by its real part
preserves feasibility and every diagonal entry; optima of diagonal
functionals are unchanged while the SDPs shrink by roughly half.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .basis import Basis, RealSection
from .quantum import Behavior
from .sdp import ConicProblem, Solution, SolverBackend, Tolerances, solve
from .words import (
    IDENTITY,
    ZERO,
    Scenario,
    Word,
    enumerate_words,
    product,
    simplify,
    word_from_string,
    word_to_string,
)

__all__ = [
    "Objective",
    "Witness",
    "RobustnessResult",
    "WitnessReport",
    "SolverFailure",
    "CERTIFIED_MARGIN",
    "max_unrestricted",
    "max_finite",
    "robustness",
    "dual_direct",
    "verify_witness",
    "event_functional",
    "gyni_objective",
]

#: A behavior counts as certified outside the set only when nu < 1 - margin.
CERTIFIED_MARGIN = 1e-4


class SolverFailure(RuntimeError):
    """A conic solve did not reach optimality."""

    def __init__(self, solution: Solution, context: str):
        super().__init__(f"{context}: solver status {solution.status}")
        self.solution = solution


def _solved(problem: ConicProblem, tolerances: Optional[Tolerances],
            backend: Optional[SolverBackend], context: str) -> Solution:
    sol = solve(problem, tolerances, backend)
    if not sol.optimal:
        raise SolverFailure(sol, context)
    return sol


@dataclass(frozen=True)
class Objective:
    """Real coefficients on observable events (canonical words of length <= l)."""

    scenario: Scenario
    coefficients: Dict[Word, float] = field(compare=False)

    def __post_init__(self) -> None:
        for word, value in self.coefficients.items():
            if word is ZERO or not 1 <= len(word) <= self.scenario.l:
                raise ValueError(f"objective word {word_to_string(word)} is not an observable event")
            if simplify(word, self.scenario) != word:
                raise ValueError(f"objective word {word_to_string(word)} is not canonical")
            if not np.isfinite(value):
                raise ValueError(f"coefficient for {word_to_string(word)} is not finite")

    def value_on(self, behavior: Behavior) -> float:
        return float(sum(c * behavior.values[w] for w, c in self.coefficients.items()))


@dataclass
class Witness:
    """Linear dimension witness: ``sum_w gamma_w P(w) >= -x`` on the whole set.

    A behavior violating the inequality admits no d-dimensional projective
    realization (at the witness's hierarchy level).
    """

    scenario: Scenario
    d: int
    k: int
    gamma: Dict[Word, float]
    x: float
    r: float
    nu: float
    provenance: Dict[str, object] = field(default_factory=dict)

    def value_on(self, behavior: Behavior) -> float:
        return float(sum(g * behavior.values[w] for w, g in self.gamma.items()))

    def margin_on(self, behavior: Behavior) -> float:
        """Slack of the witness inequality; negative means violation."""
        return self.value_on(behavior) + self.x

    def to_json_dict(self) -> dict:
        return {
            "scenario": str(self.scenario),
            "d": self.d,
            "k": self.k,
            "gamma": {word_to_string(w): float(g) for w, g in self.gamma.items()},
            "x": float(self.x),
            "r": float(self.r),
            "nu": float(self.nu),
            "provenance": self.provenance,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Witness":
        scenario = Scenario.parse(data["scenario"])
        gamma = {word_from_string(t, scenario): float(g) for t, g in data["gamma"].items()}
        return cls(
            scenario=scenario, d=int(data["d"]), k=int(data["k"]), gamma=gamma,
            x=float(data["x"]), r=float(data["r"]), nu=float(data["nu"]),
            provenance=data.get("provenance", {}),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "Witness":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass
class RobustnessResult:
    """Visibility of a behavior against the level-k d-dimensional outer set."""

    nu: float
    eta: float
    witness: Witness
    diagnostics: Dict[str, object] = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        """True when the behavior provably lies outside the tested set."""
        return self.nu < 1.0 - CERTIFIED_MARGIN


@dataclass
class WitnessReport:
    """Outcome of replaying a witness against freshly sampled behaviors."""

    n_behaviors: int
    min_margin: float
    violations: List[int] = field(default_factory=list)

    @property
    def sound(self) -> bool:
        return not self.violations


# ---------------------------------------------------------------------------
# unrestricted-dimension optimization
# ---------------------------------------------------------------------------


def _unordered_class(word):
    if word is ZERO:
        return ZERO
    reverse = tuple(reversed(word))
    return min(word, reverse)


def max_unrestricted(
    scenario: Scenario,
    objective: Objective,
    k: int = 1,
    tolerances: Optional[Tolerances] = None,
    backend: Optional[SolverBackend] = None,
) -> float:
    """Optimum of the objective over all moment matrices with a quantum realization.

    Entries are grouped into word-product equivalence classes computed
    symbolically; orthogonal products pin entries to zero, the identity
    corner is one, and the matrix is positive semidefinite.  The matrix can
    be taken real symmetric without changing diagonal objectives, which
    merges each class with its reverse.
    """
    if objective.scenario != scenario:
        raise ValueError("objective was built for a different scenario")
    index = enumerate_words(scenario, k)
    n = len(index)
    classes: Dict[object, List[Tuple[int, int]]] = {}
    for i, w1 in enumerate(index.words):
        for j, w2 in enumerate(index.words):
            cls = _unordered_class(product(w1, w2))
            classes.setdefault(cls, []).append((i, j))

    diag_class = {w: _unordered_class(product(w, w)) for w in index.words}
    class_order = [c for c in classes if c is not ZERO and c != IDENTITY]
    class_pos = {c: i for i, c in enumerate(class_order)}

    f0 = np.zeros((n, n))
    for (i, j) in classes.get(IDENTITY, []):
        f0[i, j] = 1.0
    fs = []
    for cls in class_order:
        indicator = np.zeros((n, n))
        for (i, j) in classes[cls]:
            indicator[i, j] = 1.0
        fs.append(indicator)

    c = np.zeros(len(class_order))
    for word, coef in objective.coefficients.items():
        c[class_pos[diag_class[word]]] += coef

    problem = ConicProblem(c=c, f0=f0, fs=fs)
    sol = _solved(problem, tolerances, backend, f"max_unrestricted {scenario}")
    return float(sol.objective)


# ---------------------------------------------------------------------------
# finite-dimension optimization and robustness
# ---------------------------------------------------------------------------


def _check_behavior(behavior: Behavior, basis: Basis) -> Tuple[Word, ...]:
    if behavior.scenario != basis.scenario:
        raise ValueError(
            f"behavior scenario {behavior.scenario} does not match basis scenario {basis.scenario}"
        )
    expected = basis.index.behavior_words()
    if set(behavior.values) != set(expected):
        raise ValueError("behavior words do not match the scenario's observable events")
    return expected


def max_finite(
    basis: Basis,
    objective: Objective,
    tolerances: Optional[Tolerances] = None,
    backend: Optional[SolverBackend] = None,
) -> float:
    """Optimum of the objective over the span of the basis (level-k relaxation)."""
    if objective.scenario != basis.scenario:
        raise ValueError("objective was built for a different scenario")
    section = basis.real_section
    index = basis.index
    words = list(objective.coefficients)
    gamma = np.array([objective.coefficients[w] for w in words])
    diag = section.diagonal_coefficients([index.position(w) for w in words])
    c = diag @ gamma

    corner = section.diagonal_coefficients([0]).ravel()
    n_eff = section.reduced_size
    problem = ConicProblem(
        c=c,
        f0=np.zeros((n_eff, n_eff)),
        fs=list(section.compressed),
        a=corner[None, :],
        b=np.array([1.0]),
    )
    sol = _solved(problem, tolerances, backend, f"max_finite {basis.scenario} d={basis.d} k={basis.k}")
    return float(sol.objective)


def _robustness_problem(behavior: Behavior, basis: Basis):
    words = _check_behavior(behavior, basis)
    section = basis.real_section
    index = basis.index
    nb = section.cardinality
    n_eff = section.reduced_size
    positions = [index.position(w) for w in words]
    diag = section.diagonal_coefficients(positions)      # (nb, n_words)
    corner = section.diagonal_coefficients([0]).ravel()  # (nb,)
    pvec = behavior.vector(words)

    # variables: [eta, alpha_1..alpha_nb, beta_1..beta_nb]
    n_vars = 1 + 2 * nb
    n_rows = len(words) + 2
    a = np.zeros((n_rows, n_vars))
    b = np.zeros(n_rows)
    for row, _ in enumerate(words):
        a[row, 0] = pvec[row]
        a[row, 1:1 + nb] = -diag[:, row]
        a[row, 1 + nb:] = diag[:, row]
    a[len(words), 1:1 + nb] = corner          # X corner = 1
    b[len(words)] = 1.0
    a[len(words) + 1, 0] = 1.0                # R corner = 1 - eta
    a[len(words) + 1, 1 + nb:] = corner
    b[len(words) + 1] = 1.0

    # single PSD block diag(X, R, [eta]); the 1x1 eta cell keeps the Schur
    # complement nonsingular and does not bind (the visibility is nonnegative)
    block = 2 * n_eff + 1
    f0 = np.zeros((block, block))
    fs = [np.zeros((block, block)) for _ in range(n_vars)]
    fs[0][-1, -1] = 1.0
    for i in range(nb):
        fs[1 + i][:n_eff, :n_eff] = section.compressed[i]
        fs[1 + nb + i][n_eff:2 * n_eff, n_eff:2 * n_eff] = section.compressed[i]
    c = np.zeros(n_vars)
    c[0] = 1.0
    return ConicProblem(c=c, f0=f0, fs=fs, a=a, b=b), words, pvec


def robustness(
    behavior: Behavior,
    basis: Basis,
    tolerances: Optional[Tolerances] = None,
    backend: Optional[SolverBackend] = None,
    provenance: Optional[Dict[str, object]] = None,
) -> RobustnessResult:
    """Generalized-robustness visibility, with the witness read off the dual.

    The primal maximizes the visibility ``eta`` such that
    ``eta P + (1 - eta) P'`` stays inside the tested set for some noise
    behavior ``P'`` of the set.  A visibility below one certifies the
    behavior outside the set.  The equality multipliers of the solved
    problem provide the separating witness.
    """
    problem, words, pvec = _robustness_problem(behavior, basis)
    sol = _solved(problem, tolerances, backend,
                  f"robustness {basis.scenario} d={basis.d} k={basis.k}")
    nu = float(sol.objective)
    gamma = {w: float(-sol.y[i]) for i, w in enumerate(words)}
    x = float(sol.y[len(words)])
    r = float(sol.y[len(words) + 1])
    witness = Witness(
        scenario=basis.scenario, d=basis.d, k=basis.k, gamma=gamma, x=x, r=r, nu=nu,
        provenance=dict(provenance or {}),
    )
    diagnostics = {"iterations": sol.iterations, "gap": sol.gap, "status": sol.status}
    return RobustnessResult(nu=nu, eta=nu, witness=witness, diagnostics=diagnostics)


def _symmetric_complement(section: RealSection) -> List[np.ndarray]:
    """Orthonormal basis of symmetric matrices orthogonal to the span section."""
    n = section.reduced_size
    iu = np.triu_indices(n)
    scale = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))

    def svec(mat):
        return mat[iu] * scale

    rows = np.array([svec(b) for b in section.compressed])
    _, singular, vt = np.linalg.svd(rows, full_matrices=True)
    rank = int(np.sum(singular > 1e-10 * singular[0]))
    complement = []
    for vec in vt[rank:]:
        mat = np.zeros((n, n))
        mat[iu] = vec / scale
        mat = mat + mat.T - np.diag(np.diag(mat))
        complement.append(mat)
    return complement


def dual_direct(
    behavior: Behavior,
    basis: Basis,
    tolerances: Optional[Tolerances] = None,
    backend: Optional[SolverBackend] = None,
) -> Witness:
    """Solve the witness program explicitly (independent of the primal path).

    Minimizes ``x + r`` subject to ``r = 1 + sum_w gamma_w P(w)`` and the two
    witness inequalities, with the auxiliary matrices constrained to the
    orthogonal complement of the span.  Strong duality makes the optimum
    equal the robustness visibility.
    """
    words = _check_behavior(behavior, basis)
    section = basis.real_section
    index = basis.index
    n_eff = section.reduced_size
    pvec = behavior.vector(words)
    complement = _symmetric_complement(section)
    nc = len(complement)
    nw = len(words)

    e_words = [section.compressed_diag_projector(index.position(w)) for w in words]
    e_corner = section.compressed_diag_projector(0)

    # variables: [x, r, gamma_1..gamma_nw, a_1..a_nc, b_1..b_nc]
    n_vars = 2 + nw + 2 * nc
    block = 2 * n_eff
    f0 = np.zeros((block, block))
    fs = [np.zeros((block, block)) for _ in range(n_vars)]
    fs[0][:n_eff, :n_eff] = e_corner                    # + x E00 in first LMI
    fs[1][n_eff:, n_eff:] = e_corner                    # + r E00 in second LMI
    for i in range(nw):
        fs[2 + i][:n_eff, :n_eff] = e_words[i]          # + gamma diag
        fs[2 + i][n_eff:, n_eff:] = -e_words[i]         # - gamma diag
    for j in range(nc):
        fs[2 + nw + j][:n_eff, :n_eff] = -complement[j]       # - A
        fs[2 + nw + nc + j][n_eff:, n_eff:] = -complement[j]  # - B

    a = np.zeros((1, n_vars))
    a[0, 1] = 1.0
    a[0, 2:2 + nw] = -pvec
    b = np.array([1.0])

    c = np.zeros(n_vars)
    c[0] = -1.0
    c[1] = -1.0  # maximize -(x + r)

    problem = ConicProblem(c=c, f0=f0, fs=fs, a=a, b=b)
    sol = _solved(problem, tolerances, backend,
                  f"dual_direct {basis.scenario} d={basis.d} k={basis.k}")
    x_val = float(sol.x[0])
    r_val = float(sol.x[1])
    gamma = {w: float(sol.x[2 + i]) for i, w in enumerate(words)}
    return Witness(
        scenario=basis.scenario, d=basis.d, k=basis.k, gamma=gamma,
        x=x_val, r=r_val, nu=x_val + r_val,
        provenance={"method": "dual_direct"},
    )


def verify_witness(witness: Witness, behaviors: Sequence[Behavior]) -> WitnessReport:
    """Replay the witness inequality on sampled behaviors of the tested dimension.

    A violation among in-set samples falsifies the witness; the report
    carries the minimum margin and the indices of any violators.
    """
    margins = []
    violations = []
    for i, behavior in enumerate(behaviors):
        margin = witness.margin_on(behavior)
        margins.append(margin)
        if margin < -1e-6:
            violations.append(i)
    return WitnessReport(
        n_behaviors=len(behaviors),
        min_margin=float(min(margins)) if margins else float("inf"),
        violations=violations,
    )


# ---------------------------------------------------------------------------
# event functionals
# ---------------------------------------------------------------------------


def _letter_expansion(scenario: Scenario, r: int, s: int) -> Dict[Word, float]:
    # full-outcome letter as a combination of retained-outcome words;
    # the omitted outcome is identity minus the retained projectors
    if not 0 <= r <= scenario.o - 1:
        raise ValueError(f"outcome {r} outside 0..{scenario.o - 1}")
    if not 0 <= s <= scenario.m - 1:
        raise ValueError(f"setting {s} outside 0..{scenario.m - 1}")
    if r <= scenario.o - 2:
        return {((r, s),): 1.0}
    terms: Dict[Word, float] = {IDENTITY: 1.0}
    for retained in range(scenario.o - 1):
        terms[((retained, s),)] = -1.0
    return terms


def _apply_after(second: Dict[Word, float], first: Dict[Word, float]) -> Dict[Word, float]:
    # operator composition second * first; words list first-acting letters first
    out: Dict[Word, float] = {}
    for w1, c1 in first.items():
        for w2, c2 in second.items():
            word = simplify(tuple(w1) + tuple(w2))
            if word is ZERO:
                continue
            out[word] = out.get(word, 0.0) + c1 * c2
    return {w: c for w, c in out.items() if abs(c) > 1e-12}


def event_functional(
    scenario: Scenario, outcomes: Sequence[int], settings: Sequence[int]
) -> Tuple[float, Dict[Word, float]]:
    """Express a full-outcome event probability over observable-event probabilities.

    Returns ``(offset, coefficients)`` with
    ``P(outcomes|settings) = offset + sum_w coefficients[w] * P(w)`` for every
    quantum realization.  Expands omitted outcomes through completeness and
    reduces the resulting operator polynomial; raises if a term has no
    diagonal representative (only palindromic product words do).
    """
    if len(outcomes) != len(settings):
        raise ValueError("outcome and setting sequences differ in length")
    if len(outcomes) > scenario.l:
        raise ValueError(f"event length {len(outcomes)} exceeds l={scenario.l}")
    op: Dict[Word, float] = {IDENTITY: 1.0}
    for r, s in zip(outcomes, settings):
        op = _apply_after(_letter_expansion(scenario, r, s), op)
    adjoint = {tuple(reversed(w)): c for w, c in op.items()}
    squared = _apply_after(adjoint, op)

    offset = 0.0
    coefficients: Dict[Word, float] = {}
    for word, coef in squared.items():
        if word == IDENTITY:
            offset += coef
            continue
        if word != tuple(reversed(word)):
            raise ValueError(
                f"event expands through non-palindromic product {word_to_string(word)}; "
                "not expressible over observable events"
            )
        half = word[: (len(word) + 1) // 2]  # diag(half) has product class == word
        if len(half) > scenario.l:
            raise ValueError(
                f"event needs sequences of length {len(half)} > l={scenario.l}"
            )
        coefficients[half] = coefficients.get(half, 0.0) + coef
    coefficients = {w: c for w, c in coefficients.items() if abs(c) > 1e-12}
    return offset, coefficients


#: Events of the guess-your-neighbor's-input inequality in the 2-3-2 scenario.
GYNI_EVENTS = (
    ((0, 0, 0), (0, 0, 0)),
    ((1, 1, 0), (0, 1, 1)),
    ((0, 1, 1), (1, 0, 1)),
    ((1, 0, 1), (1, 1, 0)),
)


def gyni_objective() -> Objective:
    """The guess-your-neighbor's-input functional as an observable-event objective."""
    scenario = Scenario(2, 3, 2)
    total: Dict[Word, float] = {}
    offset = 0.0
    for outcomes, settings in GYNI_EVENTS:
        off, coeffs = event_functional(scenario, outcomes, settings)
        offset += off
        for w, c in coeffs.items():
            total[w] = total.get(w, 0.0) + c
    if abs(offset) > 1e-12:
        raise AssertionError("GYNI functional should have no constant part")
    return Objective(scenario=scenario, coefficients={w: c for w, c in total.items() if abs(c) > 1e-12})
