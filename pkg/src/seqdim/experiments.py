"""Monte Carlo campaigns: certification probabilities, visibility distributions,
inequality optima and the search for behaviors beyond a target dimension.

Every campaign is reproducible: sample ``i`` of a campaign with master seed
``s`` draws its randomness from ``SeedSequence((s, i))``, so records do not
depend on execution order and campaigns can run sample-parallel.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .basis import Basis, build_basis
from .certify import (
    CERTIFIED_MARGIN,
    Objective,
    RobustnessResult,
    SolverFailure,
    Witness,
    gyni_objective,
    max_finite,
    max_unrestricted,
    robustness,
    verify_witness,
)
from .quantum import (
    Behavior,
    MeasurementSet,
    StatePrep,
    behavior_of,
    born_probability,
    random_measurements,
    random_state,
)
from .sdp import Tolerances
from .words import Scenario, word_to_string

__all__ = [
    "Campaign",
    "SampleRecord",
    "CampaignResult",
    "ProbabilityEstimate",
    "DistributionResult",
    "GyniReport",
    "HuntResult",
    "sample_rng",
    "run_campaign",
    "estimate_probability",
    "visibility_distribution",
    "probability_curve",
    "gyni_report",
    "ququart_hunt",
    "write_campaign_csv",
    "write_histogram_csv",
]

HISTOGRAM_BINS = 50


def sample_rng(master_seed: int, index: int) -> np.random.Generator:
    """Deterministic, order-independent generator for one campaign sample."""
    return np.random.default_rng(np.random.SeedSequence((master_seed, index)))


@dataclass(frozen=True)
class Campaign:
    """A visibility campaign: behaviors of one dimension tested against another."""

    scenario: Scenario
    d_sample: int
    d_test: int
    k: int
    n_samples: int
    master_seed: int

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError(f"need at least one sample, got {self.n_samples}")


@dataclass
class SampleRecord:
    index: int
    nu: Optional[float]
    certified: bool
    status: str  # ok | failed


@dataclass
class CampaignResult:
    campaign: Campaign
    records: List[SampleRecord]

    @property
    def nus(self) -> List[float]:
        return [r.nu for r in self.records if r.status == "ok"]

    @property
    def n_ok(self) -> int:
        return sum(1 for r in self.records if r.status == "ok")

    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.records if r.status != "ok")

    @property
    def n_certified(self) -> int:
        return sum(1 for r in self.records if r.certified)

    @property
    def failure_rate(self) -> float:
        return self.n_failed / len(self.records)


def _evaluate_sample(campaign: Campaign, basis: Basis, index: int,
                     tolerances: Optional[Tolerances]) -> SampleRecord:
    rng = sample_rng(campaign.master_seed, index)
    words = basis.index.behavior_words()
    state = random_state(campaign.d_sample, rng)
    measurements = random_measurements(campaign.scenario, campaign.d_sample, rng)
    behavior = Behavior(
        scenario=campaign.scenario,
        values={w: born_probability(state, measurements, w) for w in words},
    )
    try:
        result = robustness(behavior, basis, tolerances=tolerances)
    except SolverFailure:
        return SampleRecord(index=index, nu=None, certified=False, status="failed")
    return SampleRecord(
        index=index,
        nu=result.nu,
        certified=result.certified,
        status="ok",
    )


_WORKER_STATE: dict = {}


def _worker_init(campaign: Campaign, basis_json: dict, tolerances: Optional[Tolerances]) -> None:
    basis = Basis.from_json_dict(basis_json)
    basis.real_section  # warm the cached section once per worker
    _WORKER_STATE["args"] = (campaign, basis, tolerances)


def _worker_run(index: int) -> SampleRecord:
    campaign, basis, tolerances = _WORKER_STATE["args"]
    return _evaluate_sample(campaign, basis, index, tolerances)


def run_campaign(
    campaign: Campaign,
    basis: Basis,
    workers: int = 1,
    tolerances: Optional[Tolerances] = None,
    progress: Optional[Callable[[int, int], None]] = None,
) -> CampaignResult:
    """Draw behaviors from ``d_sample`` and solve their visibility one by one."""
    if basis.scenario != campaign.scenario or basis.d != campaign.d_test or basis.k != campaign.k:
        raise ValueError("basis does not match the campaign's tested set")
    indices = range(campaign.n_samples)
    records: List[SampleRecord]
    if workers <= 1:
        records = []
        for i in indices:
            records.append(_evaluate_sample(campaign, basis, i, tolerances))
            if progress:
                progress(i + 1, campaign.n_samples)
    else:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_worker_init,
            initargs=(campaign, basis.to_json_dict(), tolerances),
        ) as pool:
            records = []
            for done, record in enumerate(pool.map(_worker_run, indices, chunksize=16)):
                records.append(record)
                if progress:
                    progress(done + 1, campaign.n_samples)
    records.sort(key=lambda r: r.index)
    return CampaignResult(campaign=campaign, records=records)


def wilson_interval(successes: int, total: int, z: float = 1.959964) -> Tuple[float, float]:
    """Wilson 95% score interval for a binomial proportion."""
    if total == 0:
        return 0.0, 1.0
    p = successes / total
    denom = 1 + z * z / total
    center = (p + z * z / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class ProbabilityEstimate:
    """Estimated probability that a sampled behavior lies outside the tested set."""

    p_hat: float
    ci_low: float
    ci_high: float
    n_certified: int
    n_ok: int
    n_failed: int
    result: CampaignResult = field(repr=False)


def estimate_probability(
    campaign: Campaign,
    basis: Basis,
    workers: int = 1,
    tolerances: Optional[Tolerances] = None,
    progress: Optional[Callable[[int, int], None]] = None,
) -> ProbabilityEstimate:
    """Fraction of sampled behaviors certified outside the set, with Wilson CI.

    Counts a sample when its visibility falls below ``1 - CERTIFIED_MARGIN``;
    failed solves are excluded from both counts and reported separately.
    """
    result = run_campaign(campaign, basis, workers=workers, tolerances=tolerances,
                          progress=progress)
    n_ok = result.n_ok
    n_cert = result.n_certified
    p_hat = n_cert / n_ok if n_ok else 0.0
    low, high = wilson_interval(n_cert, n_ok)
    return ProbabilityEstimate(
        p_hat=p_hat, ci_low=low, ci_high=high,
        n_certified=n_cert, n_ok=n_ok, n_failed=result.n_failed, result=result,
    )


@dataclass
class DistributionResult:
    """Visibility histogram over a campaign."""

    mean: float
    std: float
    counts: np.ndarray
    bin_edges: np.ndarray
    result: CampaignResult = field(repr=False)


def visibility_distribution(
    campaign: Campaign,
    basis: Basis,
    workers: int = 1,
    tolerances: Optional[Tolerances] = None,
    progress: Optional[Callable[[int, int], None]] = None,
) -> DistributionResult:
    """Histogram (fixed 50 bins on [0, 1]), mean and standard deviation of nu."""
    result = run_campaign(campaign, basis, workers=workers, tolerances=tolerances,
                          progress=progress)
    nus = np.array(result.nus)
    clipped = np.clip(nus, 0.0, 1.0)
    counts, edges = np.histogram(clipped, bins=HISTOGRAM_BINS, range=(0.0, 1.0))
    return DistributionResult(
        mean=float(np.mean(clipped)) if len(nus) else float("nan"),
        std=float(np.std(clipped)) if len(nus) else float("nan"),
        counts=counts, bin_edges=edges, result=result,
    )


def probability_curve(
    scenarios: Sequence[Scenario],
    d_sample: int,
    d_test: int,
    k: int,
    n_samples: int,
    master_seed: int,
    basis_provider: Callable[[Scenario], Basis],
    workers: int = 1,
    tolerances: Optional[Tolerances] = None,
) -> List[Tuple[Scenario, ProbabilityEstimate]]:
    """Certification probability per scenario (one campaign per point)."""
    points = []
    for scenario in scenarios:
        campaign = Campaign(
            scenario=scenario, d_sample=d_sample, d_test=d_test, k=k,
            n_samples=n_samples, master_seed=master_seed,
        )
        estimate = estimate_probability(
            campaign, basis_provider(scenario), workers=workers, tolerances=tolerances
        )
        points.append((scenario, estimate))
    return points


@dataclass
class GyniReport:
    """Both guess-your-neighbor's-input optima with solver context."""

    unrestricted: float
    finite_d2_k1: float
    basis_cardinality: int
    objective_words: Dict[str, float]


def gyni_report(seed: int = 20240, tolerances: Optional[Tolerances] = None) -> GyniReport:
    """Unrestricted and qubit level-1 optima of the inequality in 2-3-2."""
    objective = gyni_objective()
    scenario = objective.scenario
    unrestricted = max_unrestricted(scenario, objective, k=1, tolerances=tolerances)
    rng = np.random.default_rng(seed)
    basis = build_basis(scenario, d=2, k=1, rng=rng, seed=seed)
    finite = max_finite(basis, objective, tolerances=tolerances)
    return GyniReport(
        unrestricted=unrestricted,
        finite_d2_k1=finite,
        basis_cardinality=basis.cardinality,
        objective_words={word_to_string(w): c for w, c in objective.coefficients.items()},
    )


@dataclass
class HuntResult:
    """Outcome of searching for a behavior certified beyond the tested dimension."""

    found: bool
    n_tried: int
    index: Optional[int] = None
    nu: Optional[float] = None
    behavior: Optional[Behavior] = None
    witness: Optional[Witness] = None
    state: Optional[np.ndarray] = None
    projectors: Optional[list] = None
    seed_entropy: Optional[Tuple[int, int]] = None
    nus: List[float] = field(default_factory=list)


def ququart_hunt(
    basis: Basis,
    n_max: int = 500,
    master_seed: int = 411,
    d_sample: int = 4,
    tolerances: Optional[Tolerances] = None,
) -> HuntResult:
    """Sample higher-dimensional behaviors until one is certified outside the set.

    Built for the 2-3-3 scenario with a qutrit basis, but works for any
    (basis, d_sample) pair.  Exhausting ``n_max`` without a hit is reported,
    not raised; the visibility record is kept either way.
    """
    scenario = basis.scenario
    words = basis.index.behavior_words()
    nus: List[float] = []
    for index in range(n_max):
        rng = sample_rng(master_seed, index)
        state = random_state(d_sample, rng)
        measurements = random_measurements(scenario, d_sample, rng)
        behavior = Behavior(
            scenario=scenario,
            values={w: born_probability(state, measurements, w) for w in words},
        )
        try:
            result = robustness(
                behavior, basis, tolerances=tolerances,
                provenance={"master_seed": master_seed, "sample_index": index},
            )
        except SolverFailure:
            continue
        nus.append(result.nu)
        if result.certified:
            return HuntResult(
                found=True, n_tried=index + 1, index=index, nu=result.nu,
                behavior=behavior, witness=result.witness,
                state=state.rho, projectors=[list(p) for p in measurements.projectors],
                seed_entropy=(master_seed, index), nus=nus,
            )
    return HuntResult(found=False, n_tried=n_max, nus=nus)


def sample_behaviors(
    scenario: Scenario, d: int, n: int, master_seed: int,
    words: Optional[Tuple] = None,
) -> List[Behavior]:
    """Draw n independent d-dimensional behaviors (for witness verification)."""
    from .words import enumerate_words

    if words is None:
        words = enumerate_words(scenario, 1).behavior_words()
    behaviors = []
    for index in range(n):
        rng = sample_rng(master_seed, index)
        state = random_state(d, rng)
        measurements = random_measurements(scenario, d, rng)
        behaviors.append(Behavior(
            scenario=scenario,
            values={w: born_probability(state, measurements, w) for w in words},
        ))
    return behaviors


# ---------------------------------------------------------------------------
# result files
# ---------------------------------------------------------------------------


def campaign_summary_dict(result: CampaignResult, provenance: Optional[dict] = None) -> dict:
    c = result.campaign
    n_ok = result.n_ok
    low, high = wilson_interval(result.n_certified, n_ok)
    return {
        "campaign": {
            "scenario": str(c.scenario), "d_sample": c.d_sample, "d_test": c.d_test,
            "k": c.k, "n_samples": c.n_samples, "master_seed": c.master_seed,
        },
        "n_ok": n_ok,
        "n_failed": result.n_failed,
        "n_certified": result.n_certified,
        "p_hat": result.n_certified / n_ok if n_ok else None,
        "wilson_95": [low, high],
        "mean_nu": float(np.mean(np.clip(result.nus, 0, 1))) if n_ok else None,
        "certified_margin": CERTIFIED_MARGIN,
        "provenance": provenance or {},
    }


def write_campaign_csv(result: CampaignResult, path) -> None:
    """Per-sample records: index, seed entropy, visibility, verdict."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "seed", "nu", "verdict"])
        for record in result.records:
            seed = f"({result.campaign.master_seed},{record.index})"
            nu = "" if record.nu is None else repr(record.nu)
            verdict = record.status if record.status != "ok" else (
                "certified" if record.certified else "not-certified"
            )
            writer.writerow([record.index, seed, nu, verdict])


def write_histogram_csv(distribution: DistributionResult, path) -> None:
    """Fixed 50-bin histogram layout on [0, 1] for plot tooling."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_low", "bin_high", "count"])
        for i, count in enumerate(distribution.counts):
            writer.writerow([
                repr(float(distribution.bin_edges[i])),
                repr(float(distribution.bin_edges[i + 1])),
                int(count),
            ])
