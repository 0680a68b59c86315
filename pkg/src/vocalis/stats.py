"""Paired nonparametric tests, effect sizes, FDR control, correlation, PCA.

Everything here is deterministic. The only randomness is the bootstrap
for rank-biserial confidence intervals, which takes an explicit seed and
defaults to DEFAULT_BOOTSTRAP_SEED so repeated runs agree bit for bit.

Conventions, surfaced in every report the CLI writes:

* Wilcoxon tests are two-sided. Zero differences are dropped ("drop"
  policy) by default; the Pratt variant is available via zero_policy.
* Exact p-values come from full sign enumeration when the effective n
  is at most EXACT_MAX_N and the absolute differences are tie-free;
  otherwise a normal approximation with tie and continuity correction.
* Confidence intervals are percentile bootstrap, 10,000 resamples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats as _distributions

DEFAULT_BOOTSTRAP_SEED = 84000
BOOTSTRAP_RESAMPLES = 10_000
EXACT_MAX_N = 20


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class PairedSample:
    pre: tuple[float, ...]
    post: tuple[float, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "pre", tuple(float(v) for v in self.pre))
        object.__setattr__(self, "post", tuple(float(v) for v in self.post))
        if len(self.pre) != len(self.post):
            raise StatsError("pre and post must have equal length")
        if len(self.pre) < 1:
            raise StatsError("paired sample is empty")
        if self.labels is not None and len(self.labels) != len(self.pre):
            raise StatsError("labels length must match sample length")
        for v in (*self.pre, *self.post):
            if not math.isfinite(v):
                raise StatsError("paired sample contains non-finite values")

    @property
    def n(self) -> int:
        return len(self.pre)

    def differences(self) -> np.ndarray:
        """post - pre, so positive differences mean an increase."""
        return np.asarray(self.post, dtype=np.float64) - np.asarray(self.pre, dtype=np.float64)


@dataclass(frozen=True)
class TestResult:
    statistic_w: float
    p_raw: float
    n_effective: int
    method: str
    p_fdr: float | None = None
    effect_r_rb: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None
    effect_d: float | None = None

    def __post_init__(self):
        if self.statistic_w < 0:
            raise StatsError("W statistic must be nonnegative")
        if not 0.0 <= self.p_raw <= 1.0:
            raise StatsError("p_raw outside [0, 1]")
        if self.p_fdr is not None and self.p_fdr < self.p_raw:
            raise StatsError("adjusted p below raw p")
        if self.effect_r_rb is not None and abs(self.effect_r_rb) > 1.0:
            raise StatsError("|r_rb| above 1")
        if self.method not in ("exact", "normal_approx"):
            raise StatsError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class RankBiserial:
    r_rb: float
    ci_low: float
    ci_high: float
    n_resamples: int
    seed: int


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    p: float
    n: int


@dataclass(frozen=True)
class PcaResult:
    """components: one loading vector per row, descending variance order."""

    components: np.ndarray
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray
    scores: np.ndarray
    means: np.ndarray
    scales: np.ndarray | None


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing the mean of their positions."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    n = len(values)
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    return ranks


def _signed_rank_sums(diffs: np.ndarray, zero_policy: str):
    """Returns (w_plus, w_minus, n_effective, tie_sizes, zero_count).

    With the "drop" policy zeros are removed before ranking; with
    "pratt" they are ranked but their ranks contribute to neither sum.
    """
    if zero_policy not in ("drop", "pratt"):
        raise StatsError(f"unknown zero_policy {zero_policy!r}")
    diffs = np.asarray(diffs, dtype=np.float64)
    zero_count = int(np.sum(diffs == 0.0))
    if zero_policy == "drop":
        diffs = diffs[diffs != 0.0]
    n_effective = int(np.sum(diffs != 0.0))
    if n_effective == 0:
        raise StatsError("degenerate sample: all differences are zero")
    ranks = _average_ranks(np.abs(diffs))
    w_plus = float(np.sum(ranks[diffs > 0]))
    w_minus = float(np.sum(ranks[diffs < 0]))
    nonzero_abs = np.abs(diffs[diffs != 0.0])
    _, counts = np.unique(nonzero_abs, return_counts=True)
    tie_sizes = tuple(int(c) for c in counts if c > 1)
    return w_plus, w_minus, n_effective, tie_sizes, zero_count


def _exact_signed_rank_p(w_min: int, n: int) -> float:
    """Two-sided exact p over all 2^n sign assignments of ranks 1..n.

    Counts rank subsets by sum with an integer knapsack table, so the
    result is an exact rational 2*count/2^n (capped at 1) evaluated in
    one floating division.
    """
    max_sum = n * (n + 1) // 2
    counts = [0] * (max_sum + 1)
    counts[0] = 1
    for rank in range(1, n + 1):
        for total in range(max_sum, rank - 1, -1):
            counts[total] += counts[total - rank]
    tail = sum(counts[: w_min + 1])
    return min(1.0, 2.0 * tail / float(2**n))


def wilcoxon_signed_rank(sample: PairedSample, zero_policy: str = "drop") -> TestResult:
    """Two-sided paired Wilcoxon signed-rank test on post - pre.

    W is the smaller of the positive and negative rank sums. The exact
    path requires tie-free absolute differences and n_effective at most
    EXACT_MAX_N (and the drop policy); everything else goes through the
    normal approximation with tie and continuity corrections.
    """
    diffs = sample.differences()
    w_plus, w_minus, n_eff, tie_sizes, zero_count = _signed_rank_sums(diffs, zero_policy)
    w_stat = min(w_plus, w_minus)

    exact_ok = (
        zero_policy == "drop"
        and n_eff <= EXACT_MAX_N
        and not tie_sizes
    )
    if exact_ok:
        p = _exact_signed_rank_p(int(round(w_stat)), n_eff)
        method = "exact"
    else:
        if zero_policy == "pratt":
            n_total = n_eff + zero_count
            mean = (n_total * (n_total + 1) - zero_count * (zero_count + 1)) / 4.0
            var = (
                n_total * (n_total + 1) * (2 * n_total + 1)
                - zero_count * (zero_count + 1) * (2 * zero_count + 1)
            ) / 24.0
        else:
            mean = n_eff * (n_eff + 1) / 4.0
            var = n_eff * (n_eff + 1) * (2 * n_eff + 1) / 24.0
        var -= sum(t**3 - t for t in tie_sizes) / 48.0
        if var <= 0:
            raise StatsError("degenerate sample: zero variance in ranks")
        centered = w_plus - mean
        corrected = math.copysign(max(abs(centered) - 0.5, 0.0), centered)
        z = corrected / math.sqrt(var)
        p = min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))
        method = "normal_approx"

    half_total = n_eff * (n_eff + 1) / 2.0
    r_rb = (w_plus - w_minus) / half_total
    return TestResult(
        statistic_w=w_stat,
        p_raw=p,
        n_effective=n_eff,
        method=method,
        effect_r_rb=r_rb,
    )


def rank_biserial(
    sample: PairedSample,
    n_resamples: int = BOOTSTRAP_RESAMPLES,
    seed: int = DEFAULT_BOOTSTRAP_SEED,
    zero_policy: str = "drop",
) -> RankBiserial:
    """Matched-pairs rank-biserial correlation with a percentile bootstrap CI.

    Pairs are resampled with replacement; a resample whose differences
    are all zero contributes 0.0. The CI is the [2.5, 97.5] percentile
    interval of the resampled effects.
    """
    diffs = sample.differences()
    w_plus, w_minus, n_eff, _, _ = _signed_rank_sums(diffs, zero_policy)
    point = (w_plus - w_minus) / (n_eff * (n_eff + 1) / 2.0)

    rng = np.random.default_rng(seed)
    n = len(diffs)
    draws = rng.integers(0, n, size=(n_resamples, n))
    effects = np.empty(n_resamples, dtype=np.float64)
    for i in range(n_resamples):
        resample = diffs[draws[i]]
        try:
            wp, wm, ne, _, _ = _signed_rank_sums(resample, zero_policy)
        except StatsError:
            effects[i] = 0.0
            continue
        effects[i] = (wp - wm) / (ne * (ne + 1) / 2.0)
    low, high = np.quantile(effects, [0.025, 0.975])
    return RankBiserial(
        r_rb=point,
        ci_low=float(low),
        ci_high=float(high),
        n_resamples=n_resamples,
        seed=seed,
    )


def cohens_d(pre, post) -> float:
    """Paired Cohen's d: mean(post - pre) / SD(post - pre), sample SD."""
    pre = np.asarray(pre, dtype=np.float64)
    post = np.asarray(post, dtype=np.float64)
    if pre.shape != post.shape or pre.ndim != 1:
        raise StatsError("pre and post must be equal-length vectors")
    if len(pre) < 2:
        raise StatsError("need at least 2 pairs for Cohen's d")
    diffs = post - pre
    sd = float(np.std(diffs, ddof=1))
    if sd == 0.0:
        raise StatsError("zero SD of differences")
    return float(np.mean(diffs)) / sd


def bh_fdr(p_values) -> list[float]:
    """Benjamini-Hochberg step-up adjusted p-values, input order preserved.

    adjusted_(k) = min over j >= k of (m/j) * p_(j), capped at 1, where
    (k) indexes the ascending sort.
    """
    p = [float(v) for v in p_values]
    for v in p:
        if not 0.0 <= v <= 1.0:
            raise StatsError(f"p-value {v} outside [0, 1]")
    m = len(p)
    if m == 0:
        return []
    order = sorted(range(m), key=lambda i: p[i])
    adjusted = [0.0] * m
    running = 1.0
    for k in range(m - 1, -1, -1):
        idx = order[k]
        # The factor m/(k+1) is computed first: it rounds to >= 1, which
        # keeps adjusted >= raw exactly (p*m/(k+1) can round one ulp under p).
        running = min(running, p[idx] * (m / (k + 1)))
        adjusted[idx] = min(running, 1.0)
    return adjusted


def pearson(x, y) -> CorrelationResult:
    """Product-moment correlation; p from the t transform on n-2 df."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise StatsError("x and y must be equal-length vectors")
    n = len(x)
    if n < 3:
        raise StatsError("need at least 3 observations")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        raise StatsError("zero variance input")
    r = float(xc @ yc) / denom
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        p = 0.0
    else:
        t = r * math.sqrt((n - 2) / (1.0 - r * r))
        p = 2.0 * float(_distributions.t.sf(abs(t), n - 2))
    return CorrelationResult(r=r, p=min(1.0, p), n=n)


def pca(matrix, standardize: bool = True) -> PcaResult:
    """PCA by eigendecomposition of the covariance of the processed matrix.

    Columns are centered, and z-scored (sample SD) when standardize is
    set. Loadings are returned descending by explained variance, each
    with its largest-magnitude entry made positive so results are stable
    across linear-algebra backends.
    """
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise StatsError("matrix must be at least 2 observations x 2 features")
    if not np.all(np.isfinite(x)):
        raise StatsError("matrix contains missing or non-finite values")
    means = x.mean(axis=0)
    processed = x - means
    scales = None
    if standardize:
        scales = np.std(x, axis=0, ddof=1)
        if np.any(scales == 0.0):
            bad = int(np.argmin(scales))
            raise StatsError(f"constant column {bad} cannot be standardized")
        processed = processed / scales
    cov = (processed.T @ processed) / (x.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]
    total = float(eigvals.sum())
    if total == 0.0:
        raise StatsError("zero total variance")
    for j in range(eigvecs.shape[1]):
        peak = int(np.argmax(np.abs(eigvecs[:, j])))
        if eigvecs[peak, j] < 0:
            eigvecs[:, j] = -eigvecs[:, j]
    components = eigvecs.T
    scores = processed @ eigvecs
    return PcaResult(
        components=components,
        explained_variance=eigvals,
        explained_variance_ratio=eigvals / total,
        scores=scores,
        means=means,
        scales=scales,
    )


# ---------------------------------------------------------------------------
# Per-pitch pre/post harness
# ---------------------------------------------------------------------------

INSUFFICIENT_DATA = "insufficient data"
DEGENERATE_SAMPLE = "degenerate sample"


@dataclass(frozen=True)
class PitchComparison:
    pitch: str
    n_pairs: int
    n_excluded: int
    result: TestResult | None
    flag: str | None = None


def pre_post_per_pitch(
    table,
    metric: str,
    pitches: list[str] | None = None,
    seed: int = DEFAULT_BOOTSTRAP_SEED,
) -> list[PitchComparison]:
    """One paired Wilcoxon per pitch with BH-FDR across the pitch family.

    Participants missing either phase at a pitch are excluded pairwise
    and counted in n_excluded. Pitches with fewer than 2 complete pairs,
    or with all-zero differences, are flagged rather than fatal and sit
    outside the FDR family.
    """
    if pitches is None:
        pitches = table.pitches(metric)
    comparisons: list[PitchComparison] = []
    tested_indices: list[int] = []
    for pitch in pitches:
        pre_vals, post_vals, labels = [], [], []
        excluded = 0
        for participant in table.participants():
            pre_v = table.value(participant, pitch, "pre", metric)
            post_v = table.value(participant, pitch, "post", metric)
            if pre_v is None and post_v is None:
                continue
            if pre_v is None or post_v is None:
                excluded += 1
                continue
            pre_vals.append(pre_v)
            post_vals.append(post_v)
            labels.append(participant)
        if len(pre_vals) < 2:
            comparisons.append(
                PitchComparison(
                    pitch=pitch,
                    n_pairs=len(pre_vals),
                    n_excluded=excluded,
                    result=None,
                    flag=INSUFFICIENT_DATA,
                )
            )
            continue
        sample = PairedSample(pre=tuple(pre_vals), post=tuple(post_vals), labels=tuple(labels))
        try:
            test = wilcoxon_signed_rank(sample)
        except StatsError:
            comparisons.append(
                PitchComparison(
                    pitch=pitch,
                    n_pairs=len(pre_vals),
                    n_excluded=excluded,
                    result=None,
                    flag=DEGENERATE_SAMPLE,
                )
            )
            continue
        effect = rank_biserial(sample, seed=seed)
        try:
            d = cohens_d(sample.pre, sample.post)
        except StatsError:
            d = None
        test = replace(
            test,
            effect_r_rb=effect.r_rb,
            ci_low=effect.ci_low,
            ci_high=effect.ci_high,
            effect_d=d,
        )
        tested_indices.append(len(comparisons))
        comparisons.append(
            PitchComparison(
                pitch=pitch,
                n_pairs=len(pre_vals),
                n_excluded=excluded,
                result=test,
                flag=None,
            )
        )
    if tested_indices:
        adjusted = bh_fdr([comparisons[i].result.p_raw for i in tested_indices])
        for i, p_adj in zip(tested_indices, adjusted):
            comp = comparisons[i]
            comparisons[i] = PitchComparison(
                pitch=comp.pitch,
                n_pairs=comp.n_pairs,
                n_excluded=comp.n_excluded,
                result=replace(comp.result, p_fdr=p_adj),
                flag=comp.flag,
            )
    return comparisons
