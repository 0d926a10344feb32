"""Scikit-learn style front end for the certification pipeline.

Fitting learns the span of the tested moment-matrix set from random samples;
prediction scores behaviors by their robustness visibility.  The estimator
composes with the usual scikit-learn tooling (``get_params``, cloning,
pipelines operating on behavior matrices).
"""

from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .basis import build_basis, rank_oracle
from .certify import CERTIFIED_MARGIN, Witness, robustness
from .quantum import Behavior
from .sdp import SolverBackend, Tolerances
from .words import Scenario, word_to_string

__all__ = ["DimensionCertifier"]

BehaviorLike = Union[Behavior, dict, np.ndarray]


class DimensionCertifier(BaseEstimator):
    """Decide whether behaviors admit a d-dimensional projective realization.

    Parameters
    ----------
    scenario : str
        The ``"m-l-o"`` scenario the behaviors live in.
    d : int
        Dimension of the tested quantum set.
    k : int
        Hierarchy level of the outer approximation; higher is tighter.
    random_state : int or None
        Seed for the randomized basis construction.
    cross_check : bool
        Re-derive the basis cardinality through the independent rank oracle
        during fitting and fail loudly on mismatch.

    Attributes
    ----------
    basis_ : Basis
        Orthonormal basis of the span of sampled moment matrices.
    feature_names_ : list of str
        Serialized behavior words, in the canonical column order expected by
        array inputs of :meth:`decision_function` and :meth:`predict`.

    Examples
    --------
    >>> certifier = DimensionCertifier(scenario="3-2-2", d=2, k=1, random_state=7)
    >>> certifier.fit()  # doctest: +ELLIPSIS
    DimensionCertifier(...)
    >>> flags = certifier.predict(behaviors)  # doctest: +SKIP
    """

    def __init__(
        self,
        scenario: str = "3-2-2",
        d: int = 2,
        k: int = 1,
        random_state: Optional[int] = None,
        stop_window: int = 20,
        drop_threshold: float = 1e-7,
        cross_check: bool = False,
        backend: Optional[SolverBackend] = None,
    ):
        self.scenario = scenario
        self.d = d
        self.k = k
        self.random_state = random_state
        self.stop_window = stop_window
        self.drop_threshold = drop_threshold
        self.cross_check = cross_check
        self.backend = backend

    def fit(self, X=None, y=None):
        """Learn the span of the tested set by randomized sampling.

        ``X`` and ``y`` are accepted for pipeline compatibility and ignored:
        the training data is generated internally from the scenario.
        """
        scenario = Scenario.parse(self.scenario)
        seed = self.random_state if self.random_state is not None else 0
        rng = np.random.default_rng(seed)
        self.basis_ = build_basis(
            scenario, self.d, self.k, rng,
            stop_window=self.stop_window,
            drop_threshold=self.drop_threshold,
            seed=seed,
        )
        if self.cross_check:
            oracle_rng = np.random.default_rng(seed + 1)
            expected = rank_oracle(
                scenario, self.d, self.k,
                n_samples=2 * self.basis_.cardinality + 10, rng=oracle_rng,
            )
            if expected != self.basis_.cardinality:
                raise RuntimeError(
                    f"basis cardinality {self.basis_.cardinality} disagrees with "
                    f"rank oracle {expected}"
                )
        self.words_ = self.basis_.index.behavior_words()
        self.feature_names_ = [word_to_string(w) for w in self.words_]
        self.n_features_in_ = len(self.words_)
        return self

    def _as_behaviors(self, X) -> list:
        if isinstance(X, (Behavior, dict)):
            X = [X]
        if isinstance(X, np.ndarray) or (
            isinstance(X, Sequence) and X and not isinstance(X[0], (Behavior, dict))
        ):
            array = check_array(X, dtype=float, ensure_2d=True)
            if array.shape[1] != self.n_features_in_:
                raise ValueError(
                    f"expected {self.n_features_in_} behavior columns "
                    f"({self.feature_names_}), got {array.shape[1]}"
                )
            if array.min() < -1e-9 or array.max() > 1 + 1e-9:
                raise ValueError("behavior entries must be probabilities in [0, 1]")
            scenario = self.basis_.scenario
            return [
                Behavior(scenario=scenario, values=dict(zip(self.words_, np.clip(row, 0, 1))))
                for row in array
            ]
        behaviors = []
        scenario = self.basis_.scenario
        for item in X:
            if isinstance(item, Behavior):
                behaviors.append(item)
            else:
                behaviors.append(Behavior.from_json_dict({"scenario": str(scenario), "values": item}))
        return behaviors

    def decision_function(self, X) -> np.ndarray:
        """Robustness visibility per behavior; below one means outside the set."""
        check_is_fitted(self, "basis_")
        return np.array([
            robustness(b, self.basis_, backend=self.backend).nu
            for b in self._as_behaviors(X)
        ])

    def predict(self, X) -> np.ndarray:
        """True where the behavior is certified to need dimension greater than d."""
        return self.decision_function(X) < 1.0 - CERTIFIED_MARGIN

    def witness(self, behavior: BehaviorLike) -> Witness:
        """Dimension witness extracted from the robustness dual of one behavior."""
        check_is_fitted(self, "basis_")
        (behavior_obj,) = self._as_behaviors(behavior)
        return robustness(behavior_obj, self.basis_, backend=self.backend).witness
