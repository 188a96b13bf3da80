"""Mass generation and screening of candidate mixes.

Pipeline: sample conditions per age bucket, decode candidate mixes, score
them with the trained predictors, compare against the best extant mixes in
each strength band (strict dominance in all three impact dimensions), and
summarize the winners via reduction percentages and an archetypal-analysis
hull of their impact footprints.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cvae import CONDITION_COLUMNS, Condition, CvaeParams, generate_batch
from .dataset import (
    BUCKETS,
    CONSTITUENTS,
    IMPACT_NAMES,
    AgeBucket,
    Dataset,
    Formula,
    ImpactVector,
    NormalizationSpec,
)
from .predictors import ImpactPredictor, StrengthPredictorSet, predict_impacts_batch, \
    predict_strength_batch

#: Strength band centers (MPa) screened by default for each age bucket.
DEFAULT_BAND_CENTERS: dict[AgeBucket, tuple[float, ...]] = {
    AgeBucket.LE3: (30.0, 40.0),
    AgeBucket.D7: (30.0, 40.0),
    AgeBucket.D14: (20.0, 60.0),
    AgeBucket.D28: (70.0, 80.0),
    AgeBucket.D56: (40.0, 50.0, 70.0, 80.0),
    AgeBucket.GE90: (80.0,),
}

DEFAULT_CANDIDATES_PER_BUCKET = 60_000
DEFAULT_PROGRESSION_SAMPLES = 10_000
DEFAULT_ARCHETYPES = 8

_EVAL_CHUNK = 8192  # fixed chunk size keeps results independent of --jobs


@dataclass(frozen=True)
class StrengthBand:
    center_mpa: float
    half_width_mpa: float = 1.0

    def __post_init__(self) -> None:
        if self.half_width_mpa <= 0:
            raise ValueError(f"half_width must be > 0, got {self.half_width_mpa}")

    def contains(self, value_mpa) -> np.ndarray:
        return np.abs(np.asarray(value_mpa) - self.center_mpa) <= self.half_width_mpa

    def label(self) -> str:
        return f"{self.center_mpa:g}±{self.half_width_mpa:g}"


@dataclass(frozen=True)
class Candidate:
    formula: Formula
    condition_used: Condition
    predicted_strength: float
    predicted_impacts: ImpactVector
    bucket: AgeBucket


@dataclass
class CandidateSet:
    """Generated mixes with predictor scores, stored as parallel arrays."""

    bucket: AgeBucket
    conditions: np.ndarray  # (n, 5) normalized condition vectors
    amounts: np.ndarray     # (n, 7) kg/m3
    strengths: np.ndarray   # (n,) MPa
    impacts: np.ndarray     # (n, 3) physical units

    def __len__(self) -> int:
        return self.amounts.shape[0]

    def candidate(self, i: int) -> Candidate:
        return Candidate(
            formula=Formula.from_array(self.amounts[i]),
            condition_used=Condition(*self.conditions[i]),
            predicted_strength=float(self.strengths[i]),
            predicted_impacts=ImpactVector(*self.impacts[i]),
            bucket=self.bucket,
        )

    def subset(self, indices) -> "CandidateSet":
        idx = np.asarray(indices, dtype=int)
        return CandidateSet(
            bucket=self.bucket,
            conditions=self.conditions[idx],
            amounts=self.amounts[idx],
            strengths=self.strengths[idx],
            impacts=self.impacts[idx],
        )


def sample_condition_array(n: int, bucket: AgeBucket, normalization: NormalizationSpec,
                           seed: int) -> np.ndarray:
    """(n, 5) conditions: uniform strength/impacts, age pinned to the bucket center."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    age01 = normalization.normalize(float(bucket.center_days), "age")
    out = np.empty((n, 5))
    draws = rng.uniform(0.0, 1.0, size=(n, 4))
    out[:, 0] = draws[:, 0]        # strength
    out[:, 1] = age01
    out[:, 2:] = draws[:, 1:]      # gwp, ap, cbw
    return out


def sample_conditions(n: int, bucket: AgeBucket, normalization: NormalizationSpec,
                      seed: int) -> list[Condition]:
    return [Condition(*row) for row in sample_condition_array(n, bucket, normalization, seed)]


def generate_candidates(
    cvae_params: CvaeParams,
    impact_predictor: ImpactPredictor,
    strength_predictors: StrengthPredictorSet,
    conditions: np.ndarray,
    bucket: AgeBucket,
    seed: int,
    jobs: int = 1,
) -> CandidateSet:
    """Decode one mix per condition and score it with both predictors.

    All randomness (the latent draws) comes from a single stream up front, so
    the result is identical for any number of evaluation jobs.
    """
    X = np.asarray(conditions, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(CONDITION_COLUMNS):
        raise ValueError(f"conditions must be (n, 5), got {X.shape}")
    n = X.shape[0]
    if n == 0:
        empty = np.empty((0,))
        return CandidateSet(bucket, X, np.empty((0, 7)), empty, np.empty((0, 3)))
    rng = np.random.Generator(np.random.PCG64(seed))
    Z = rng.standard_normal((n, 2))

    def evaluate(chunk: slice):
        amounts = generate_batch(cvae_params, X[chunk], Z[chunk])
        impacts = predict_impacts_batch(impact_predictor, amounts)
        strengths = predict_strength_batch(strength_predictors, amounts, bucket)
        return amounts, strengths, impacts

    chunks = [slice(s, min(s + _EVAL_CHUNK, n)) for s in range(0, n, _EVAL_CHUNK)]
    if jobs > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(evaluate, chunks))
    else:
        parts = [evaluate(c) for c in chunks]
    amounts = np.concatenate([p[0] for p in parts])
    strengths = np.concatenate([p[1] for p in parts])
    impacts = np.concatenate([p[2] for p in parts])
    return CandidateSet(bucket=bucket, conditions=X, amounts=amounts,
                        strengths=strengths, impacts=impacts)


@dataclass(frozen=True)
class DominanceBaseline:
    """Per-dimension impact minima over extant records in a (bucket, band)."""

    minima: ImpactVector | None
    count: int

    @property
    def empty(self) -> bool:
        return self.count == 0


def extant_baseline(dataset: Dataset, bucket: AgeBucket, band: StrengthBand
                    ) -> DominanceBaseline:
    """Best observed impacts among extant records matching bucket and band."""
    ids = [
        i for i in dataset.bucket_ids(bucket)
        if band.contains(dataset.records[i].raw.strength_mpa)
    ]
    if not ids:
        return DominanceBaseline(minima=None, count=0)
    impacts = dataset.matrix(IMPACT_NAMES, ids)
    minima = impacts.min(axis=0)
    return DominanceBaseline(minima=ImpactVector(*minima), count=len(ids))


def filter_dominating(candidates: CandidateSet, baseline: DominanceBaseline,
                      band: StrengthBand) -> CandidateSet:
    """Candidates inside the band that strictly beat the baseline in all 3 impacts."""
    if baseline.empty or len(candidates) == 0:
        return candidates.subset([])
    in_band = band.contains(candidates.strengths)
    better = np.all(candidates.impacts < baseline.minima.as_array(), axis=1)
    return candidates.subset(np.flatnonzero(in_band & better))


@dataclass(frozen=True)
class ReductionRow:
    bucket: AgeBucket
    band: StrengthBand
    n_extant: int
    n_better: int
    # mean percentage reduction per dimension; None when undefined
    reductions: dict[str, float | None]


@dataclass
class ReductionReport:
    rows: list[ReductionRow] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["bucket,strength_band,gwp_pct,ap_pct,cbw_pct,n_better,n_extant"]
        for row in self.rows:
            cells = [row.bucket.name, row.band.label()]
            for name in IMPACT_NAMES:
                v = row.reductions.get(name)
                cells.append("" if v is None else f"{v:.4f}")
            cells.append(str(row.n_better))
            cells.append(str(row.n_extant))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def to_doc(self) -> dict:
        return {
            "schema": "greencrete.reduction/1",
            "rows": [
                {
                    "bucket": r.bucket.name,
                    "band_center_mpa": r.band.center_mpa,
                    "band_half_width_mpa": r.band.half_width_mpa,
                    "n_extant": r.n_extant,
                    "n_better": r.n_better,
                    "reduction_pct": dict(r.reductions),
                }
                for r in self.rows
            ],
        }


def reduction_row(filtered: CandidateSet, baseline: DominanceBaseline,
                  band: StrengthBand) -> ReductionRow:
    """Average percentage reduction of the dominating subset vs the baseline."""
    reductions: dict[str, float | None] = {}
    if baseline.empty or len(filtered) == 0:
        reductions = {name: None for name in IMPACT_NAMES}
        n_extant = baseline.count
    else:
        base = baseline.minima.as_array()
        for j, name in enumerate(IMPACT_NAMES):
            if base[j] == 0.0:
                reductions[name] = None
            else:
                reductions[name] = float(
                    np.mean(100.0 * (base[j] - filtered.impacts[:, j]) / base[j])
                )
        n_extant = baseline.count
    return ReductionRow(bucket=filtered.bucket, band=band, n_extant=n_extant,
                        n_better=len(filtered), reductions=reductions)


# --- archetypal analysis ----------------------------------------------------

def _project_rows_to_simplex(M: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto the probability simplex."""
    n, d = M.shape
    sorted_desc = -np.sort(-M, axis=1)
    cumsum = np.cumsum(sorted_desc, axis=1)
    ks = np.arange(1, d + 1)
    candidates = sorted_desc - (cumsum - 1.0) / ks
    rho = np.sum(candidates > 0, axis=1)
    theta = (cumsum[np.arange(n), rho - 1] - 1.0) / rho
    return np.maximum(M - theta[:, None], 0.0)


def _quadratic_descent(M, grad_fn, lipschitz, iters):
    step = 1.0 / max(lipschitz, 1e-12)
    for _ in range(iters):
        M = _project_rows_to_simplex(M - step * grad_fn(M))
    return M


@dataclass
class ArchetypeSet:
    """Archetypes and simplex weight matrices from alternating least squares."""

    archetypes: np.ndarray         # (k, d)
    data_weights: np.ndarray       # (n, k) rows on the simplex: X ~ A @ archetypes
    archetype_weights: np.ndarray  # (k, n) rows on the simplex: archetypes = B @ X
    rss: float
    rss_trace: list[float]
    n_iterations: int


def archetypal_analysis(points: np.ndarray, k: int, max_iters: int = 200,
                        tol: float = 1e-6, seed: int = 0, inner_iters: int = 30
                        ) -> ArchetypeSet:
    """Alternating constrained least squares for archetypes.

    Alternates projected-gradient solves of the two row-simplex problems
    (data-to-archetype weights A, archetype-to-data weights B) minimizing
    ``||X - A B X||^2``.  Each inner solve uses the 1/L step for its convex
    quadratic, so the residual sum of squares never increases across outer
    iterations.  Stops when the relative RSS improvement drops below tol.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"points must be 2-d, got shape {X.shape}")
    n = X.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds number of points n={n}")

    rng = np.random.Generator(np.random.PCG64(seed))
    chosen = rng.choice(n, size=k, replace=False)
    B = np.zeros((k, n))
    B[np.arange(k), chosen] = 1.0
    Z = B @ X
    # seed A with the nearest archetype per point (exact when k == n, distinct)
    d2 = ((X[:, None, :] - Z[None, :, :]) ** 2).sum(axis=2)
    A = np.zeros((n, k))
    A[np.arange(n), np.argmin(d2, axis=1)] = 1.0

    def rss_of(A, B):
        resid = X - A @ (B @ X)
        return float(np.sum(resid * resid))

    trace = [rss_of(A, B)]
    xxt_norm = float(np.linalg.eigvalsh(X.T @ X).max()) if X.size else 0.0
    for iteration in range(max_iters):
        Z = B @ X
        gram = Z @ Z.T
        lip_a = 2.0 * float(np.linalg.eigvalsh(gram).max()) if k > 0 else 0.0
        XZt = X @ Z.T
        A = _quadratic_descent(
            A, lambda M: 2.0 * (M @ gram - XZt), lip_a, inner_iters
        )

        AtA = A.T @ A
        lip_b = 2.0 * float(np.linalg.eigvalsh(AtA).max()) * xxt_norm
        AtX = A.T @ X

        def grad_b(M):
            return 2.0 * (AtA @ (M @ X) - AtX) @ X.T

        B = _quadratic_descent(B, grad_b, lip_b, inner_iters)

        rss = rss_of(A, B)
        trace.append(rss)
        prev = trace[-2]
        if prev == 0.0 or (prev - rss) / max(prev, 1e-300) < tol:
            break
    return ArchetypeSet(
        archetypes=B @ X,
        data_weights=A,
        archetype_weights=B,
        rss=trace[-1],
        rss_trace=trace,
        n_iterations=len(trace) - 1,
    )


def nearest_to_archetypes(candidates: CandidateSet, archetypes01: np.ndarray,
                          normalization: NormalizationSpec) -> list[Candidate]:
    """Per archetype, the candidate closest in normalized impact space.

    Ties break toward the lower candidate index.
    """
    if len(candidates) == 0:
        raise ValueError("no candidates to match against archetypes")
    impacts01 = normalization.normalize_array(candidates.impacts, IMPACT_NAMES)
    out = []
    for arch in np.asarray(archetypes01, dtype=float):
        d2 = np.sum((impacts01 - arch) ** 2, axis=1)
        out.append(candidates.candidate(int(np.argmin(d2))))
    return out


# --- strength-conditioned progression ----------------------------------------

@dataclass
class ProgressionReport:
    bucket: AgeBucket
    strength_min_mpa: float
    strength_max_mpa: float
    desired_mpa: np.ndarray
    predicted_mpa: np.ndarray
    rmse_mpa: float

    def to_doc(self) -> dict:
        return {
            "schema": "greencrete.progression/1",
            "bucket": self.bucket.name,
            "strength_range_mpa": [self.strength_min_mpa, self.strength_max_mpa],
            "rmse_mpa": self.rmse_mpa,
            "pairs": [[float(d), float(p)]
                      for d, p in zip(self.desired_mpa, self.predicted_mpa)],
        }


def progression_experiment(
    cvae_params: CvaeParams,
    strength_predictors: StrengthPredictorSet,
    dataset: Dataset,
    bucket: AgeBucket,
    n: int = DEFAULT_PROGRESSION_SAMPLES,
    seed: int = 0,
    grid: bool = False,
) -> ProgressionReport:
    """Sweep desired strength across the bucket's training range.

    Desired strength is (1-alpha)*min + alpha*max with alpha uniform in
    [0, 1] (or an inclusive grid when ``grid`` is set, whose endpoints hit
    the range bounds exactly).  Age is pinned to the bucket center and the
    impact condition components to their training-set means.
    """
    norm = dataset.normalization
    train_bucket_ids = dataset.bucket_ids(bucket, dataset.train_ids)
    if not train_bucket_ids:
        raise ValueError(f"no training records for bucket {bucket.name}")
    strengths = dataset.column_array("strength", train_bucket_ids)
    lo, hi = float(strengths.min()), float(strengths.max())

    rng = np.random.Generator(np.random.PCG64(seed))
    alpha = np.linspace(0.0, 1.0, n) if grid else rng.uniform(0.0, 1.0, size=n)
    desired = (1.0 - alpha) * lo + alpha * hi

    X = np.empty((n, 5))
    X[:, 0] = [norm.normalize(v, "strength") for v in desired]
    X[:, 1] = norm.normalize(float(bucket.center_days), "age")
    for j, name in enumerate(IMPACT_NAMES):
        values01 = [
            norm.normalize(dataset.records[i].column_value(name), name)
            for i in dataset.train_ids
        ]
        X[:, 2 + j] = float(np.mean(values01))
    Z = rng.standard_normal((n, 2))
    amounts = generate_batch(cvae_params, X, Z)
    predicted = predict_strength_batch(strength_predictors, amounts, bucket)
    rmse = float(math.sqrt(np.mean((predicted - desired) ** 2)))
    return ProgressionReport(
        bucket=bucket,
        strength_min_mpa=lo,
        strength_max_mpa=hi,
        desired_mpa=desired,
        predicted_mpa=predicted,
        rmse_mpa=rmse,
    )


# --- exports ------------------------------------------------------------------

def strength_spectrum_export(candidates: CandidateSet) -> dict:
    """Versioned JSON document for the 3-d impact scatter colored by strength."""
    n = len(candidates)

    def axis(values):
        return None if n == 0 else [float(values.min()), float(values.max())]

    return {
        "schema": "greencrete.spectrum/1",
        "bucket": candidates.bucket.name,
        "count": n,
        "axes": {
            "gwp": axis(candidates.impacts[:, 0]),
            "ap": axis(candidates.impacts[:, 1]),
            "cbw": axis(candidates.impacts[:, 2]),
            "strength_mpa": axis(candidates.strengths),
        },
        "records": [
            {
                "gwp": float(candidates.impacts[i, 0]),
                "ap": float(candidates.impacts[i, 1]),
                "cbw": float(candidates.impacts[i, 2]),
                "strength_mpa": float(candidates.strengths[i]),
                "formula": {
                    name: float(candidates.amounts[i, j])
                    for j, name in enumerate(CONSTITUENTS)
                },
            }
            for i in range(n)
        ],
    }


def hull_export(bucket: AgeBucket, band: StrengthBand, hull: ArchetypeSet,
                nearest: list[Candidate], normalization: NormalizationSpec) -> dict:
    """Archetype hull plus the nearest generated formula to each archetype."""
    archetypes_physical = normalization.denormalize_array(hull.archetypes, IMPACT_NAMES)
    return {
        "schema": "greencrete.hull/1",
        "bucket": bucket.name,
        "band_center_mpa": band.center_mpa,
        "band_half_width_mpa": band.half_width_mpa,
        "k": hull.archetypes.shape[0],
        "rss": hull.rss,
        "archetypes": [
            dict(zip(IMPACT_NAMES, map(float, row))) for row in archetypes_physical
        ],
        "nearest_formulas": [
            {
                "formula": {c: getattr(cand.formula, c) for c in CONSTITUENTS},
                "predicted_strength_mpa": cand.predicted_strength,
                "predicted_impacts": {
                    k: getattr(cand.predicted_impacts, k) for k in IMPACT_NAMES
                },
            }
            for cand in nearest
        ],
    }
