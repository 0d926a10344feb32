"""Randomized basis construction for the span of fixed-dimension moment matrices.

The span of the set of d-dimensional level-k moment matrices is explored by
sampling random realizations and orthogonalizing each candidate against the
matrices retained so far (modified Gram-Schmidt with one re-orthogonalization
pass).  Residual norms exhibit a sharp drop, many orders of magnitude, once
the span is exhausted; the builder stops after a configured run of
sub-threshold candidates and the drop gap is checked downstream.

An independent rank oracle (singular values of stacked vectorized samples)
cross-checks every cardinality.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .quantum import moment_matrix, random_measurements, random_state
from .words import Scenario, WordIndex, enumerate_words

__all__ = [
    "Basis",
    "RealSection",
    "BasisBuildError",
    "build_basis",
    "rank_oracle",
    "classify",
    "CardinalityTable",
    "basis_cache_name",
]

DROP_THRESHOLD = 1e-7
STOP_WINDOW = 20


class BasisBuildError(RuntimeError):
    """No norm drop observed within the iteration budget."""

    def __init__(self, message: str, norm_log: List[float]):
        super().__init__(message)
        self.norm_log = norm_log


@dataclass(frozen=True)
class RealSection:
    """Real symmetric section of a basis span, facially reduced to its common range.

    The span of moment matrices is closed under transposition (conjugating a
    realization is again a realization), so every feasibility question that
    only involves diagonal entries can be solved over the real symmetric
    members of the span.  ``isometry`` maps the common range of that section
    back to the full index space; the compressed elements are what the SDPs
    consume.
    """

    elements: Tuple[np.ndarray, ...]        # orthonormal, real symmetric, full size
    isometry: np.ndarray                    # N x n_eff, columns orthonormal
    compressed: np.ndarray                  # (card_real, n_eff, n_eff)

    @property
    def cardinality(self) -> int:
        return len(self.elements)

    @property
    def reduced_size(self) -> int:
        return self.isometry.shape[1]

    def diagonal_coefficients(self, positions: Sequence[int]) -> np.ndarray:
        """Matrix D[i, j] = elements[i][p_j, p_j] for the given index positions."""
        return np.array([[el[p, p] for p in positions] for el in self.elements])

    def compressed_diag_projector(self, position: int) -> np.ndarray:
        v = self.isometry[position]
        return np.outer(v, v)


@dataclass
class Basis:
    """Orthonormal basis of the span of (scenario, d, k) moment matrices."""

    scenario: Scenario
    d: int
    k: int
    elements: List[np.ndarray]
    norm_log: List[float]
    seed: Optional[int] = None
    version: str = ""

    @property
    def cardinality(self) -> int:
        return len(self.elements)

    @property
    def index(self) -> WordIndex:
        return enumerate_words(self.scenario, self.k)

    @cached_property
    def real_section(self) -> RealSection:
        reals = []
        for el in self.elements:
            candidate = np.ascontiguousarray(el.real)
            for kept in reals:
                candidate = candidate - np.sum(kept * candidate) * kept
            for kept in reals:
                candidate = candidate - np.sum(kept * candidate) * kept
            norm = np.sqrt(np.sum(candidate * candidate))
            if norm > 1e-9:
                reals.append(candidate / norm)
        support = sum(b @ b for b in reals)
        eigvals, eigvecs = np.linalg.eigh(support)
        keep = eigvals > 1e-10 * eigvals[-1]
        isometry = eigvecs[:, keep]
        compressed = np.stack([isometry.T @ b @ isometry for b in reals])
        compressed = 0.5 * (compressed + compressed.transpose(0, 2, 1))
        return RealSection(elements=tuple(reals), isometry=isometry, compressed=compressed)

    def residual(self, matrix: np.ndarray) -> float:
        """Hilbert-Schmidt norm of the component of ``matrix`` outside the span."""
        rem = matrix.astype(complex).copy()
        for el in self.elements:
            rem -= np.vdot(el, rem).real * el
        return float(np.sqrt(np.vdot(rem, rem).real))

    def drop_gap(self) -> float:
        """Ratio min(retained residuals) / max(rejected residuals)."""
        retained = [n for n in self.norm_log if n >= DROP_THRESHOLD]
        rejected = [n for n in self.norm_log if n < DROP_THRESHOLD]
        if not rejected:
            return float("inf")
        return min(retained) / max(max(rejected), 1e-300)

    # -- persistence --------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "scenario": str(self.scenario),
            "d": self.d,
            "k": self.k,
            "seed": self.seed,
            "version": self.version,
            "cardinality": self.cardinality,
            "norm_log": [float(v) for v in self.norm_log],
            "elements": [
                [[[float(z.real), float(z.imag)] for z in row] for row in el]
                for el in self.elements
            ],
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json_dict(cls, data: dict) -> "Basis":
        elements = [
            np.array([[complex(re, im) for re, im in row] for row in el])
            for el in data["elements"]
        ]
        return cls(
            scenario=Scenario.parse(data["scenario"]),
            d=int(data["d"]),
            k=int(data["k"]),
            elements=elements,
            norm_log=[float(v) for v in data["norm_log"]],
            seed=data.get("seed"),
            version=data.get("version", ""),
        )

    @classmethod
    def load(cls, path) -> "Basis":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def basis_cache_name(scenario: Scenario, d: int, k: int, seed: int, version: str) -> str:
    return f"basis_{scenario}_d{d}_k{k}_seed{seed}_v{version or 'dev'}.json"


def _sample_moment(scenario: Scenario, d: int, index: WordIndex, rng: np.random.Generator):
    state = random_state(d, rng)
    measurements = random_measurements(scenario, d, rng)
    return moment_matrix(state, measurements, index).entries


def build_basis(
    scenario: Scenario,
    d: int,
    k: int,
    rng: np.random.Generator,
    stop_window: int = STOP_WINDOW,
    drop_threshold: float = DROP_THRESHOLD,
    max_candidates: Optional[int] = None,
    seed: Optional[int] = None,
    version: str = "",
) -> Basis:
    """Sample moment matrices until ``stop_window`` consecutive candidates fail
    to add a new direction.

    Candidates are normalized to unit Hilbert-Schmidt norm before
    orthogonalization, so ``drop_threshold`` is a relative residual.  The
    residual of every processed candidate is kept in ``norm_log``.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    index = enumerate_words(scenario, k)
    n = len(index)
    if max_candidates is None:
        max_candidates = 3 * n * n + 50 * stop_window
    elements: List[np.ndarray] = []
    norm_log: List[float] = []
    consecutive_rejections = 0
    for _ in range(max_candidates):
        candidate = _sample_moment(scenario, d, index, rng)
        candidate = candidate / np.sqrt(np.vdot(candidate, candidate).real)
        for el in elements:
            candidate = candidate - np.vdot(el, candidate).real * el
        for el in elements:  # second pass keeps orthogonality at scale
            candidate = candidate - np.vdot(el, candidate).real * el
        norm = float(np.sqrt(np.vdot(candidate, candidate).real))
        norm_log.append(norm)
        if norm >= drop_threshold:
            elements.append(candidate / norm)
            consecutive_rejections = 0
        else:
            consecutive_rejections += 1
            if consecutive_rejections >= stop_window:
                return Basis(
                    scenario=scenario, d=d, k=k, elements=elements,
                    norm_log=norm_log, seed=seed, version=version,
                )
    raise BasisBuildError(
        f"no norm drop after {max_candidates} candidates for {scenario} d={d} k={k}",
        norm_log,
    )


def rank_oracle(
    scenario: Scenario, d: int, k: int, n_samples: int, rng: np.random.Generator
) -> int:
    """Numerical rank of stacked vectorized samples; cross-checks build_basis.

    Rank counts singular values above ``1e-7`` times the largest.  Entirely
    independent of the Gram-Schmidt path.
    """
    index = enumerate_words(scenario, k)
    rows = []
    for _ in range(n_samples):
        m = _sample_moment(scenario, d, index, rng)
        rows.append(np.concatenate([m.real.ravel(), m.imag.ravel()]))
    singular = np.linalg.svd(np.array(rows), compute_uv=False)
    return int(np.sum(singular > 1e-7 * singular[0]))


@dataclass
class CardinalityTable:
    """Classification of scenarios by basis cardinality across dimensions."""

    k: int
    dims: Tuple[int, ...]
    cardinalities: Dict[str, Dict[int, Optional[int]]]
    errors: Dict[str, Dict[int, str]] = field(default_factory=dict)

    def ratio(self, scenario_key: str) -> Optional[float]:
        """Cardinality ratio d=3 over d=2 where both are available."""
        row = self.cardinalities.get(scenario_key, {})
        c2, c3 = row.get(2), row.get(3)
        if c2 and c3:
            return c3 / c2
        return None

    def gap_flags(self, scenario_key: str) -> Dict[Tuple[int, int], bool]:
        """Flag adjacent dimension pairs whose cardinality strictly increases."""
        row = self.cardinalities.get(scenario_key, {})
        flags = {}
        dims = [d for d in self.dims if row.get(d) is not None]
        for lo, hi in zip(dims, dims[1:]):
            flags[(lo, hi)] = row[hi] > row[lo]
        return flags

    def has_gap(self, scenario_key: str) -> bool:
        return any(self.gap_flags(scenario_key).values())

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "dims": list(self.dims),
            "cardinalities": {
                key: {str(d): c for d, c in row.items()}
                for key, row in self.cardinalities.items()
            },
            "ratios": {key: self.ratio(key) for key in self.cardinalities},
            "gaps": {
                key: {f"{lo}->{hi}": bool(v) for (lo, hi), v in self.gap_flags(key).items()}
                for key in self.cardinalities
            },
            "errors": self.errors,
        }


def classify(
    scenarios: Sequence[Scenario],
    dims: Sequence[int],
    k: int,
    rng: np.random.Generator,
    stop_window: int = STOP_WINDOW,
    drop_threshold: float = DROP_THRESHOLD,
) -> CardinalityTable:
    """Build one basis per (scenario, d) cell and tabulate the cardinalities.

    Per-cell build failures are recorded and do not abort the table.
    """
    table = CardinalityTable(k=k, dims=tuple(dims), cardinalities={}, errors={})
    for scenario in scenarios:
        key = str(scenario)
        table.cardinalities[key] = {}
        for d in dims:
            try:
                basis = build_basis(
                    scenario, d, k, rng,
                    stop_window=stop_window, drop_threshold=drop_threshold,
                )
                table.cardinalities[key][d] = basis.cardinality
            except BasisBuildError as exc:
                table.cardinalities[key][d] = None
                table.errors.setdefault(key, {})[d] = str(exc)
    return table
