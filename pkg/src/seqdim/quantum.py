"""Dense complex linear algebra for sampling states, measurements and moments.

Random pure states are drawn by applying a Haar unitary to a fixed fiducial
vector; random projective measurements are built by binning the columns of a
Haar unitary into outcome groups, one unitary per setting.  Moment matrices
collect the expectation values ``Tr[op(w)^dagger op(w') rho]`` over a word
index and are Hermitian positive semidefinite for every quantum realization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .words import IDENTITY, ZERO, Scenario, Word, WordIndex, word_to_string

__all__ = [
    "StatePrep",
    "MeasurementSet",
    "MomentMatrix",
    "Behavior",
    "haar_unitary",
    "random_state",
    "random_measurements",
    "sequence_operator",
    "born_probability",
    "moment_matrix",
    "behavior_of",
    "sample_behavior",
]


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a d x d unitary from the Haar measure.

    QR factorization of a complex standard-Gaussian (Ginibre) matrix, with
    the phase convention that makes the triangular factor's diagonal real
    positive; this renders the distribution exactly Haar.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    phases = np.diag(r).copy()
    phases /= np.abs(phases)
    return q * phases


@dataclass(frozen=True)
class StatePrep:
    """A density operator.  Sampled states are pure, ``rho = U|0><0|U^dagger``."""

    rho: np.ndarray

    @property
    def dim(self) -> int:
        return self.rho.shape[0]


def random_state(d: int, rng: np.random.Generator) -> StatePrep:
    """Haar-random pure state of dimension ``d``."""
    u = haar_unitary(d, rng)
    psi = u[:, 0]
    return StatePrep(rho=np.outer(psi, psi.conj()))


@dataclass(frozen=True)
class MeasurementSet:
    """One projective measurement per setting, realized by binning.

    For setting ``s`` the projector of full outcome ``r`` is the sum of
    ``U_s |j><j| U_s^dagger`` over the bin ``bins[s][r]``; the bins partition
    ``{0..d-1}``, so completeness and mutual orthogonality hold by
    construction.  When ``d < o`` the surplus outcomes carry empty bins
    (zero projectors), flagged in :attr:`has_empty_bins`.
    """

    scenario: Scenario
    dim: int
    projectors: Tuple[Tuple[np.ndarray, ...], ...]  # [setting][full outcome]
    bins: Tuple[Tuple[Tuple[int, ...], ...], ...]

    @property
    def has_empty_bins(self) -> bool:
        return any(len(b) == 0 for setting in self.bins for b in setting)

    def projector(self, r: int, s: int) -> np.ndarray:
        return self.projectors[s][r]


def _random_bins(d: int, o: int, rng: np.random.Generator) -> Tuple[Tuple[int, ...], ...]:
    # Uniform assignment of each dimension index to an outcome; when d >= o,
    # rejection-resample until every bin is nonempty.
    while True:
        assignment = rng.integers(0, o, size=d)
        if d < o or len(np.unique(assignment)) == o:
            break
    return tuple(tuple(int(j) for j in np.flatnonzero(assignment == r)) for r in range(o))


def random_measurements(scenario: Scenario, d: int, rng: np.random.Generator) -> MeasurementSet:
    """One Haar unitary and one random binning per setting."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    projectors: List[Tuple[np.ndarray, ...]] = []
    bins: List[Tuple[Tuple[int, ...], ...]] = []
    for _ in range(scenario.m):
        u = haar_unitary(d, rng)
        setting_bins = _random_bins(d, scenario.o, rng)
        setting_projs = []
        for bin_indices in setting_bins:
            if bin_indices:
                cols = u[:, list(bin_indices)]
                setting_projs.append(cols @ cols.conj().T)
            else:
                setting_projs.append(np.zeros((d, d), dtype=complex))
        projectors.append(tuple(setting_projs))
        bins.append(setting_bins)
    return MeasurementSet(scenario=scenario, dim=d, projectors=tuple(projectors), bins=tuple(bins))


def sequence_operator(measurements: MeasurementSet, word) -> np.ndarray:
    """Composition of the word's projectors in sequence order (first acts first)."""
    d = measurements.dim
    if word is ZERO:
        return np.zeros((d, d), dtype=complex)
    op = np.eye(d, dtype=complex)
    for r, s in word:
        op = measurements.projector(r, s) @ op
    return op


def born_probability(state: StatePrep, measurements: MeasurementSet, word: Word) -> float:
    """Probability ``Tr[op(w) rho op(w)^dagger]`` of observing the word's event."""
    op = sequence_operator(measurements, word)
    p = np.trace(op @ state.rho @ op.conj().T).real
    # clip numerical noise at the boundary of [0, 1]
    return float(min(max(p, 0.0), 1.0))


@dataclass(frozen=True)
class MomentMatrix:
    """Hermitian matrix of moments ``Tr[op(w)^dagger op(w') rho]`` over a word index."""

    index: WordIndex
    entries: np.ndarray

    def entry(self, w1: Word, w2: Word) -> complex:
        return complex(self.entries[self.index.position(w1), self.index.position(w2)])

    def to_json_dict(self) -> dict:
        return {
            "scenario": str(self.index.scenario),
            "level": self.index.level,
            "words": [word_to_string(w) for w in self.index.words],
            "entries": [[[float(z.real), float(z.imag)] for z in row] for row in self.entries],
        }


def moment_matrix(state: StatePrep, measurements: MeasurementSet, index: WordIndex) -> MomentMatrix:
    """Assemble the moment matrix of a realization over ``index``."""
    if measurements.dim != state.dim:
        raise ValueError(
            f"dimension mismatch: state is {state.dim}, measurements are {measurements.dim}"
        )
    ops = [sequence_operator(measurements, w) for w in index.words]
    stacked = np.stack(ops)
    # entries[i, j] = Tr[ops[i]^dagger ops[j] rho] = <ops[i], ops[j] rho>_HS
    right = np.matmul(stacked, state.rho)
    entries = np.einsum("iab,jab->ij", stacked.conj(), right)
    entries = 0.5 * (entries + entries.conj().T)  # enforce exact Hermiticity
    return MomentMatrix(index=index, entries=entries)


@dataclass(frozen=True)
class Behavior:
    """Probabilities of the observable events: canonical words of length 1..l."""

    scenario: Scenario
    values: Dict[Word, float] = field(compare=False)

    def vector(self, words: Tuple[Word, ...]) -> np.ndarray:
        return np.array([self.values[w] for w in words])

    def to_json_dict(self) -> dict:
        return {
            "scenario": str(self.scenario),
            "values": {word_to_string(w): float(p) for w, p in self.values.items()},
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Behavior":
        from .words import word_from_string

        scenario = Scenario.parse(data["scenario"])
        values = {}
        for text, p in data["values"].items():
            word = word_from_string(text, scenario)
            p = float(p)
            if not -1e-9 <= p <= 1 + 1e-9:
                raise ValueError(f"probability {p} for word {text!r} outside [0, 1]")
            if not 1 <= len(word) <= scenario.l:
                raise ValueError(f"word {text!r} is not an observable event of {scenario}")
            values[word] = min(max(p, 0.0), 1.0)
        return cls(scenario=scenario, values=values)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "Behavior":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def behavior_of(matrix: MomentMatrix) -> Behavior:
    """Extract the observable behavior: diagonal entries of words of length 1..l."""
    scenario = matrix.index.scenario
    values = {}
    for i, w in enumerate(matrix.index.words):
        if 1 <= len(w) <= scenario.l:
            p = matrix.entries[i, i].real
            values[w] = float(min(max(p, 0.0), 1.0))
    return Behavior(scenario=scenario, values=values)


def sample_behavior(
    scenario: Scenario,
    d: int,
    rng: np.random.Generator,
    words: Optional[Tuple[Word, ...]] = None,
) -> Behavior:
    """Draw a random d-dimensional behavior (diagonal moments only; no full matrix)."""
    state = random_state(d, rng)
    measurements = random_measurements(scenario, d, rng)
    if words is None:
        from .words import enumerate_words

        words = enumerate_words(scenario, 1).behavior_words()
    values = {w: born_probability(state, measurements, w) for w in words}
    return Behavior(scenario=scenario, values=values)
