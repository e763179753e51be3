"""Catalog of fourteen categorical encoders sharing one fit/transform contract.

Families:

* grouping: onehot, basen, backdiff, helmert, sum  (vector codes, target-free)
* ordering: ordinal, count                          (scalar codes, target-free)
* string:   similarity, minhash                     (codes from the level string)
* target:   mean, sshrink, mestimate, jamesstein, glmm  (codes from the target)

Every fitted encoder maps a level string to a fixed-width float vector and
carries an explicit policy for unseen levels. String encoders can also encode
unseen levels from the raw string on the fly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

GROUPING_VARIANTS = ("onehot", "basen", "backdiff", "helmert", "sum")
ORDERING_VARIANTS = ("ordinal", "count")
STRING_VARIANTS = ("similarity", "minhash")
TARGET_VARIANTS = ("mean", "sshrink", "mestimate", "jamesstein", "glmm")
ENCODER_VARIANTS = GROUPING_VARIANTS + ORDERING_VARIANTS + STRING_VARIANTS + TARGET_VARIANTS

_CONTRAST_SCHEMES = ("backdiff", "helmert", "sum")
_VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class LevelTable:
    """Distinct levels of a column in first-appearance order."""

    levels: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.levels:
            raise ValueError("no levels: column is empty")
        if len(set(self.levels)) != len(self.levels):
            raise ValueError("levels must be distinct")

    @property
    def cardinality(self) -> int:
        return len(self.levels)

    def index(self, level: str) -> int:
        return self.levels.index(level)


def fit_levels(column: Sequence[str]) -> LevelTable:
    """Collect distinct levels in order of first appearance. Cells must be strings;
    run imputation first if the column can contain missing markers."""
    seen: dict[str, None] = {}
    for v in column:
        if not isinstance(v, str):
            raise TypeError(f"categorical cell is not a string: {v!r} (impute first?)")
        if v not in seen:
            seen[v] = None
    return LevelTable(levels=tuple(seen))


@dataclass(frozen=True)
class EncoderSpec:
    """Encoder variant plus hyperparameters; unused fields are ignored by fit()."""

    variant: str
    base: int = 2
    s1: float = 20.0
    s2: float = 10.0
    m: float = 1.0
    ngram_range: tuple[int, int] = (2, 4)
    n_components: int = 30
    hash_seed: int = 0
    glmm_max_iter: int = 500
    glmm_tol: float = 1e-10

    def __post_init__(self) -> None:
        if self.variant not in ENCODER_VARIANTS:
            raise ValueError(f"unknown encoder variant {self.variant!r}")
        if self.base < 2:
            raise ValueError("base must be >= 2")
        if self.s2 <= 0:
            raise ValueError("s2 must be positive")
        if self.m < 0:
            raise ValueError("m must be nonnegative")
        lo, hi = self.ngram_range
        if not (1 <= lo <= hi):
            raise ValueError(f"bad ngram_range {self.ngram_range}")
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        if self.glmm_max_iter < 1 or self.glmm_tol <= 0:
            raise ValueError("bad GLMM iteration settings")


@dataclass
class FittedEncoder:
    """Frozen level -> vector map with an unseen-level policy.

    encode_fn, when set (string encoders), computes a vector for levels outside
    level_map; otherwise unseen levels get unseen_policy.
    """

    variant: str
    level_map: dict[str, np.ndarray]
    output_dim: int
    unseen_policy: np.ndarray
    encode_fn: Callable[[str], np.ndarray] | None = None
    detail: object = None

    def __post_init__(self) -> None:
        for level, vec in self.level_map.items():
            if vec.shape != (self.output_dim,):
                raise ValueError(f"level {level!r} maps to shape {vec.shape}")
        if self.unseen_policy.shape != (self.output_dim,):
            raise ValueError("unseen policy width disagrees with output_dim")


def transform(enc: FittedEncoder, column: Sequence[str]) -> np.ndarray:
    """Encode a column into an (n_rows, output_dim) float matrix."""
    out = np.empty((len(column), enc.output_dim), dtype=float)
    for i, v in enumerate(column):
        if not isinstance(v, str):
            raise TypeError(f"categorical cell is not a string: {v!r} (impute first?)")
        vec = enc.level_map.get(v)
        if vec is None:
            if enc.encode_fn is not None:
                vec = enc.encode_fn(v)
            else:
                vec = enc.unseen_policy
        out[i] = vec
    return out


def output_dim(variant: str, cardinality: int, spec: EncoderSpec | None = None) -> int:
    """Encoded width as a function of training cardinality (the dimension law)."""
    if spec is None:
        spec = EncoderSpec(variant=variant)
    if variant in ("onehot", "similarity"):
        return cardinality
    if variant in _CONTRAST_SCHEMES:
        return cardinality - 1
    if variant == "basen":
        return _basen_width(cardinality, spec.base)
    if variant == "minhash":
        return spec.n_components
    if variant in ORDERING_VARIANTS or variant in TARGET_VARIANTS:
        return 1
    raise ValueError(f"unknown encoder variant {variant!r}")


# ---------------------------------------------------------------------------
# grouping encoders


def fit_onehot(levels: LevelTable) -> FittedEncoder:
    c = levels.cardinality
    eye = np.eye(c)
    level_map = {v: eye[k].copy() for k, v in enumerate(levels.levels)}
    return FittedEncoder(
        variant="onehot",
        level_map=level_map,
        output_dim=c,
        unseen_policy=np.zeros(c),
    )


def _basen_width(cardinality: int, base: int) -> int:
    width = 1
    while base**width < cardinality + 1:
        width += 1
    return width


def _basen_digits(k: int, base: int, width: int) -> np.ndarray:
    digits = np.zeros(width)
    for pos in range(width - 1, -1, -1):
        digits[pos] = k % base
        k //= base
    return digits


def fit_basen(levels: LevelTable, base: int = 2) -> FittedEncoder:
    """Level k (1-indexed, appearance order) becomes the base-`base` digits of k,
    most significant digit first. All-zero codes are reserved for unseen levels."""
    c = levels.cardinality
    width = _basen_width(c, base)
    level_map = {
        v: _basen_digits(k, base, width) for k, v in enumerate(levels.levels, start=1)
    }
    return FittedEncoder(
        variant="basen",
        level_map=level_map,
        output_dim=width,
        unseen_policy=np.zeros(width),
    )


def contrast_matrix(cardinality: int, scheme: str) -> np.ndarray:
    """Rows of the (c, c-1) contrast coding matrix for levels 1..c.

    sum: level k -> e_k for k < c, level c -> all -1.
    helmert: contrast j compares level j+1 against the mean of levels 1..j.
    backdiff: contrast j is the step from level j to level j+1 (fractional codes).
    """
    c = cardinality
    if c < 1:
        raise ValueError("need at least one level")
    if scheme == "sum":
        return np.vstack([np.eye(c - 1), -np.ones((1, c - 1))]) if c > 1 else np.zeros((1, 0))
    if scheme == "helmert":
        mat = np.zeros((c, c - 1))
        for j in range(1, c):
            mat[:j, j - 1] = -1.0
            mat[j, j - 1] = float(j)
        return mat
    if scheme == "backdiff":
        mat = np.zeros((c, c - 1))
        for j in range(1, c):
            mat[:j, j - 1] = -(c - j) / c
            mat[j:, j - 1] = j / c
        return mat
    raise ValueError(f"unknown contrast scheme {scheme!r}")


def fit_contrast(levels: LevelTable, scheme: str) -> FittedEncoder:
    if scheme not in _CONTRAST_SCHEMES:
        raise ValueError(f"unknown contrast scheme {scheme!r}")
    mat = contrast_matrix(levels.cardinality, scheme)
    level_map = {v: mat[k].copy() for k, v in enumerate(levels.levels)}
    return FittedEncoder(
        variant=scheme,
        level_map=level_map,
        output_dim=mat.shape[1],
        unseen_policy=np.zeros(mat.shape[1]),
    )


# ---------------------------------------------------------------------------
# ordering encoders


def fit_ordinal(levels: LevelTable) -> FittedEncoder:
    """Level k (appearance order) -> [k], 1-indexed; unseen -> [0]."""
    level_map = {v: np.array([float(k)]) for k, v in enumerate(levels.levels, start=1)}
    return FittedEncoder(
        variant="ordinal", level_map=level_map, output_dim=1, unseen_policy=np.zeros(1)
    )


def fit_count(column: Sequence[str]) -> FittedEncoder:
    """Level -> [number of occurrences in the training column]; unseen -> [0]."""
    levels = fit_levels(column)
    counts = {v: 0 for v in levels.levels}
    for v in column:
        counts[v] += 1
    level_map = {v: np.array([float(counts[v])]) for v in levels.levels}
    return FittedEncoder(
        variant="count", level_map=level_map, output_dim=1, unseen_policy=np.zeros(1)
    )


# ---------------------------------------------------------------------------
# string encoders


def ngrams(s: str, n: int) -> list[str]:
    return [s[i : i + n] for i in range(len(s) - n + 1)]


def ngram_overlap(a: str, b: str, n: int) -> int:
    """Number of distinct length-n substrings the two strings share."""
    return len(set(ngrams(a, n)) & set(ngrams(b, n)))


def gram_set(s: str, ngram_range: tuple[int, int]) -> frozenset[str]:
    """Union of n-gram sets over the range; a string too short for even the
    smallest n is kept whole as a single gram."""
    lo, hi = ngram_range
    grams = set()
    for n in range(lo, hi + 1):
        grams.update(ngrams(s, n))
    return frozenset(grams) if grams else frozenset({s})


def fit_similarity(levels: LevelTable, ngram_range: tuple[int, int] = (2, 4)) -> FittedEncoder:
    """Component j of the code for value v is the raw count of distinct n-grams v
    shares with training level j, summed over the n-gram range. Unnormalized on
    purpose; a level string always matches itself with its full gram count."""
    lo, hi = ngram_range
    train_grams = [
        {n: frozenset(ngrams(v, n)) for n in range(lo, hi + 1)} for v in levels.levels
    ]

    def encode(value: str) -> np.ndarray:
        out = np.zeros(levels.cardinality)
        for n in range(lo, hi + 1):
            value_grams = set(ngrams(value, n))
            if not value_grams:
                continue
            for j in range(levels.cardinality):
                out[j] += len(value_grams & train_grams[j][n])
        return out

    level_map = {v: encode(v) for v in levels.levels}
    return FittedEncoder(
        variant="similarity",
        level_map=level_map,
        output_dim=levels.cardinality,
        unseen_policy=np.zeros(levels.cardinality),
        encode_fn=encode,
    )


_MASK64 = (1 << 64) - 1


def _fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & _MASK64
    return h


def _mix64_array(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, vectorized over uint64 (wrapping arithmetic)."""
    x = x.copy()
    x ^= x >> np.uint64(30)
    x *= np.uint64(0xBF58476D1CE4E5B9)
    x ^= x >> np.uint64(27)
    x *= np.uint64(0x94D049BB133111EB)
    x ^= x >> np.uint64(31)
    return x


def minhash_signature(
    value: str,
    n_components: int = 30,
    ngram_range: tuple[int, int] = (2, 4),
    hash_seed: int = 0,
) -> np.ndarray:
    """Per component j: minimum over the value's grams of a 64-bit hash seeded by
    hash_seed + j, scaled by 2**-64 into [0, 1). Deterministic across platforms."""
    grams = sorted(gram_set(value, ngram_range))
    gram_hashes = np.fromiter(
        (_fnv1a64(g.encode("utf-8")) for g in grams), dtype=np.uint64, count=len(grams)
    )
    comp_seeds = (np.arange(n_components, dtype=np.uint64) + np.uint64(hash_seed & _MASK64))
    comp_seeds = _mix64_array(comp_seeds)
    table = _mix64_array(comp_seeds[:, None] ^ gram_hashes[None, :])
    return table.min(axis=1).astype(np.float64) * 2.0**-64


def fit_minhash(
    levels: LevelTable,
    n_components: int = 30,
    ngram_range: tuple[int, int] = (2, 4),
    hash_seed: int = 0,
) -> FittedEncoder:
    def encode(value: str) -> np.ndarray:
        return minhash_signature(value, n_components, ngram_range, hash_seed)

    level_map = {v: encode(v) for v in levels.levels}
    return FittedEncoder(
        variant="minhash",
        level_map=level_map,
        output_dim=n_components,
        unseen_policy=np.zeros(n_components),
        encode_fn=encode,
    )


# ---------------------------------------------------------------------------
# target encoders


@dataclass(frozen=True)
class GroupStats:
    """Per-level target statistics plus the global mean, all from training rows.

    sse holds each level's within-group sum of squared deviations around its own
    mean, so pooled variances can be formed without a second pass.
    """

    levels: LevelTable
    counts: np.ndarray
    means: np.ndarray
    sse: np.ndarray
    total_count: int
    prior_mean: float


def compute_group_stats(column: Sequence[str], target: Sequence[float]) -> GroupStats:
    y = np.asarray(target, dtype=float)
    if len(column) != y.shape[0]:
        raise ValueError("column and target lengths differ")
    if y.shape[0] == 0:
        raise ValueError("empty column")
    levels = fit_levels(column)
    c = levels.cardinality
    idx = {v: k for k, v in enumerate(levels.levels)}
    codes = np.fromiter((idx[v] for v in column), dtype=int, count=len(column))
    counts = np.bincount(codes, minlength=c)
    sums = np.bincount(codes, weights=y, minlength=c)
    means = sums / counts
    sq = np.bincount(codes, weights=y * y, minlength=c)
    sse = np.maximum(sq - counts * means**2, 0.0)
    return GroupStats(
        levels=levels,
        counts=counts,
        means=means,
        sse=sse,
        total_count=int(y.shape[0]),
        prior_mean=float(y.mean()),
    )


def shrink_factors(stats: GroupStats, scheme: str, spec: EncoderSpec) -> np.ndarray:
    """Per-level multiplier B_k on the group mean; the prior gets weight 1 - B_k."""
    m_k = stats.counts.astype(float)
    if scheme == "mean":
        return np.ones_like(m_k)
    if scheme == "sshrink":
        return 1.0 / (1.0 + np.exp(-(m_k - spec.s1) / spec.s2))
    if scheme == "mestimate":
        return m_k / (m_k + spec.m)
    if scheme == "jamesstein":
        c = stats.levels.cardinality
        if c < 4:
            # the (c-3)/(c-1) factor degenerates; fall back to plain group means
            return np.ones_like(m_k)
        m = stats.total_count
        pooled = float(stats.sse.sum()) / (m - c) if m > c else 0.0
        sigma_k2 = pooled / m_k
        tau2 = float(np.var(stats.means, ddof=1))
        denom = sigma_k2 + tau2
        ratio = (c - 3) / (c - 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            one_minus_b = np.where(denom > 0, ratio * sigma_k2 / np.where(denom > 0, denom, 1.0), 0.0)
        return np.clip(1.0 - one_minus_b, 0.0, 1.0)
    raise ValueError(f"unknown shrinkage scheme {scheme!r}")


def fit_target_encoder(stats: GroupStats, scheme: str, spec: EncoderSpec) -> FittedEncoder:
    """Shrunk group-mean encoder: level k -> [B_k * mean_k + (1 - B_k) * prior].

    Unseen levels get the prior mean (full shrinkage).
    """
    b = shrink_factors(stats, scheme, spec)
    codes = b * stats.means + (1.0 - b) * stats.prior_mean
    level_map = {
        v: np.array([codes[k]]) for k, v in enumerate(stats.levels.levels)
    }
    return FittedEncoder(
        variant=scheme,
        level_map=level_map,
        output_dim=1,
        unseen_policy=np.array([stats.prior_mean]),
        detail=stats,
    )


@dataclass(frozen=True)
class GlmmFit:
    """Converged state of the Gaussian random-intercept model y = mu + w_level + eps."""

    levels: LevelTable
    mu: float
    tau2: float
    sigma2: float
    effects: np.ndarray
    n_iter: int
    converged: bool


def fit_glmm(
    column: Sequence[str],
    target: Sequence[float],
    max_iter: int = 500,
    tol: float = 1e-10,
) -> GlmmFit:
    """EM fit of the random-intercept model; the returned effects are the BLUPs

        w_k = m_k tau2 (ybar_k - mu) / (m_k tau2 + sigma2)

    evaluated at the returned variance estimates (one extra E-step after the
    variance components settle). A level with higher conditional target mean gets
    a higher effect. tau2 collapsing to zero sends every effect to zero.
    """
    stats = compute_group_stats(column, target)
    counts = stats.counts.astype(float)
    ybar = stats.means
    m = float(stats.total_count)
    mu = stats.prior_mean
    tau2 = float(np.var(ybar))
    within = float(stats.sse.sum())
    sigma2 = within / m if within > 0 else float(np.var(np.asarray(target, dtype=float)))
    sigma2 = max(sigma2, _VAR_FLOOR)
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        denom = counts * tau2 + sigma2
        w = counts * tau2 * (ybar - mu) / denom
        v = tau2 * sigma2 / denom
        mu = stats.prior_mean - float(counts @ w) / m
        new_tau2 = float(np.mean(w * w + v))
        resid = stats.sse + counts * (ybar - mu - w) ** 2
        new_sigma2 = max(float((resid.sum() + counts @ v) / m), _VAR_FLOOR)
        delta = abs(new_tau2 - tau2) + abs(new_sigma2 - sigma2)
        tau2, sigma2 = new_tau2, new_sigma2
        if delta < tol:
            converged = True
            break
    denom = counts * tau2 + sigma2
    effects = counts * tau2 * (ybar - mu) / denom
    return GlmmFit(
        levels=stats.levels,
        mu=mu,
        tau2=tau2,
        sigma2=sigma2,
        effects=effects,
        n_iter=n_iter,
        converged=converged,
    )


def fit_glmm_encoder(
    column: Sequence[str],
    target: Sequence[float],
    max_iter: int = 500,
    tol: float = 1e-10,
) -> FittedEncoder:
    """Level k -> [w_k], the fitted random effect. Unseen levels encode to [0],
    which is exactly the model's prior for a level it never saw."""
    fit_result = fit_glmm(column, target, max_iter=max_iter, tol=tol)
    level_map = {
        v: np.array([fit_result.effects[k]])
        for k, v in enumerate(fit_result.levels.levels)
    }
    return FittedEncoder(
        variant="glmm",
        level_map=level_map,
        output_dim=1,
        unseen_policy=np.zeros(1),
        detail=fit_result,
    )


# ---------------------------------------------------------------------------
# dispatch and export


def fit(spec: EncoderSpec, column: Sequence[str], target: Sequence[float] | None = None) -> FittedEncoder:
    """Fit any cataloged encoder on a training column (plus target where needed)."""
    variant = spec.variant
    if variant in TARGET_VARIANTS and target is None:
        raise ValueError(f"encoder {variant!r} needs a target")
    if variant == "onehot":
        return fit_onehot(fit_levels(column))
    if variant == "basen":
        return fit_basen(fit_levels(column), base=spec.base)
    if variant in _CONTRAST_SCHEMES:
        return fit_contrast(fit_levels(column), scheme=variant)
    if variant == "ordinal":
        return fit_ordinal(fit_levels(column))
    if variant == "count":
        return fit_count(column)
    if variant == "similarity":
        return fit_similarity(fit_levels(column), ngram_range=spec.ngram_range)
    if variant == "minhash":
        return fit_minhash(
            fit_levels(column),
            n_components=spec.n_components,
            ngram_range=spec.ngram_range,
            hash_seed=spec.hash_seed,
        )
    if variant == "glmm":
        return fit_glmm_encoder(column, target, max_iter=spec.glmm_max_iter, tol=spec.glmm_tol)
    if variant in TARGET_VARIANTS:
        return fit_target_encoder(compute_group_stats(column, target), variant, spec)
    raise ValueError(f"unknown encoder variant {variant!r}")


def export_encoder_csv(enc: FittedEncoder, path: str) -> None:
    """Audit dump: one row per trained level, columns level, c1..cl."""
    import csv as _csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["level"] + [f"c{j + 1}" for j in range(enc.output_dim)])
        for level, vec in enc.level_map.items():
            writer.writerow([level] + [repr(float(x)) for x in vec])
