"""Exact permutation p-values and the end-to-end test runners.

The p-value construction draws sigma_0, ..., sigma_M iid uniformly from a
fixed permutation set S and compares the observed statistic against
T evaluated under sigma_m o sigma_0^{-1} for m = 1..M:

    p = (1 + #{m : T_m >= T_obs}) / (1 + M).

This is finite-sample valid for *any* fixed S, which is what licenses the
drastically restricted swap sets used here.  The restricted runner evaluates
each reference statistic incrementally along the swap path (sigma_0's swaps,
then sigma_m's swaps, each an O(d) or O(N) update); the full-relabeling
runner evaluates all reference labelings in one batched pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import blockdesign, sampler, stats
from .core import (
    LABEL_A,
    LabelState,
    PooledSample,
    RestrictedPermutation,
    compose_with_inverse,
    permute_labels,
)
from .errors import DesignError, EmptySwapSetError
from .rng import as_generator, as_seed_sequence

MEAN_DIFF = "mean-diff"
MMD2 = "mmd2"
STATISTICS = (MEAN_DIFF, MMD2)

RESTRICTED_MATCHING = "restricted-matching"
RESTRICTED_SINGLE_SWAP = "restricted-single-swap"
FULL_RELABEL = "full-relabel"
SCHEMES = (RESTRICTED_MATCHING, RESTRICTED_SINGLE_SWAP, FULL_RELABEL)

_PATH_CHECK_TOL = 1e-8


@dataclass
class TestConfig:
    """Configuration shared by the runners, diagnostics, and the harness."""

    statistic: str = MEAN_DIFF
    scheme: str = RESTRICTED_MATCHING
    n_perms: int = 100
    alpha: float = 0.05
    rho: float = 0.2
    blocks: int = 4
    bandwidth: float | str = stats.MEDIAN_BANDWIDTH
    seed: int | np.random.SeedSequence | None = 0
    sided: str = "two"
    debug: bool = False
    design_retries: int = 10

    def __post_init__(self) -> None:
        if self.statistic not in STATISTICS:
            raise ValueError(f"unknown statistic {self.statistic!r}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.n_perms < 1:
            raise ValueError("need at least one permutation")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.sided not in ("one", "two"):
            raise ValueError(f"sided must be 'one' or 'two', got {self.sided!r}")


@dataclass(frozen=True)
class TestResult:
    observed_t: float
    p_value: float
    perm_stats: np.ndarray
    reject: bool
    critical_value_empirical: float
    statistic: str
    scheme: str
    n1: int
    n2: int
    l_max: int | None
    bandwidth: float | None

    def __post_init__(self) -> None:
        ps = np.asarray(self.perm_stats, dtype=float)
        ps.setflags(write=False)
        object.__setattr__(self, "perm_stats", ps)


def p_value(observed_t: float, ref_stats: np.ndarray) -> float:
    """(1 + #{m : ref >= observed}) / (1 + M); ties count toward the numerator."""
    ref_stats = np.asarray(ref_stats, dtype=float)
    if ref_stats.ndim != 1 or ref_stats.size < 1:
        raise ValueError("need at least one reference statistic")
    m = ref_stats.size
    return float((1 + int(np.sum(ref_stats >= observed_t))) / (1 + m))


def empirical_critical_value(observed_t: float, ref_stats: np.ndarray, alpha: float) -> float:
    """ceil((1 - alpha)(M + 1))-th order statistic of {refs} union {observed}."""
    aug = np.sort(np.append(np.asarray(ref_stats, dtype=float), observed_t))
    k = math.ceil((1.0 - alpha) * aug.size)
    k = min(max(k, 1), aug.size)
    return float(aug[k - 1])


def prepare_design(
    sample: PooledSample, labels: LabelState, cfg: TestConfig, seed=None
) -> tuple[blockdesign.BlockDesign, blockdesign.SwapSet, stats.KernelMatrix | None]:
    """Build blocks, pairs, representatives, and the swap set from the observed data.

    The blocking score never reads the labels.  If the drawn representative
    set yields an empty swap set, representatives are re-drawn with a fresh
    substream up to cfg.design_retries times.

    Raises:
        DesignError: if every retry produced an empty swap set.
    """
    kmat = None
    if cfg.statistic == MMD2:
        kmat = stats.gaussian_kernel_matrix(sample, cfg.bandwidth)
        design = blockdesign.kernel_score_blocks(kmat, cfg.blocks)
    else:
        design = blockdesign.quantile_blocks(sample, cfg.blocks)
    design = blockdesign.complementary_pairs(design)
    root = as_seed_sequence(cfg.seed if seed is None else seed)
    attempts = max(1, cfg.design_retries)
    last_error: Exception | None = None
    for child in root.spawn(attempts):
        candidate = blockdesign.select_representatives(design, cfg.rho, child)
        try:
            swapset = blockdesign.build_swap_set(candidate, labels)
        except EmptySwapSetError as exc:
            last_error = exc
            continue
        return candidate, swapset, kmat
    raise DesignError(
        f"empty swap set after {attempts} representative draws"
    ) from last_error


def _make_state(sample, labels, kmat, cfg):
    if cfg.statistic == MEAN_DIFF:
        return stats.MeanDiffState(sample, labels)
    return stats.MMDState(kmat, labels)


def _full_eval(sample, labels, kmat, cfg) -> float:
    if cfg.statistic == MEAN_DIFF:
        return stats.mean_diff_statistic(stats.mean_diff_full(sample, labels), cfg.sided)
    return stats.mmd2_full(kmat, labels)


def _draw_sigma(swapset, cfg, seed) -> RestrictedPermutation:
    if cfg.scheme == RESTRICTED_MATCHING:
        return sampler.sample_restricted(swapset, seed)
    return sampler.sample_single_swap(swapset, seed, mode=sampler.WITH_IDENTITY)


def run_restricted_test(sample: PooledSample, labels: LabelState, cfg: TestConfig) -> TestResult:
    """Block-restricted permutation test on the observed labeling.

    Draws sigma_0..sigma_M iid from the restricted sampler, evaluates each
    reference statistic by walking sigma_0's swaps and then sigma_m's swaps as
    incremental label exchanges, and returns the exact p-value.  With
    cfg.debug every path evaluation is re-verified against a from-scratch
    computation of the composed labeling.
    """
    if cfg.scheme not in (RESTRICTED_MATCHING, RESTRICTED_SINGLE_SWAP):
        raise ValueError(f"run_restricted_test got scheme {cfg.scheme!r}")
    root = as_seed_sequence(cfg.seed)
    design_seed, sigma_root = root.spawn(2)
    design, swapset, kmat = prepare_design(sample, labels, cfg, seed=design_seed)
    m = cfg.n_perms
    sigmas = [_draw_sigma(swapset, cfg, s) for s in sigma_root.spawn(m + 1)]

    observed_state = _make_state(sample, labels, kmat, cfg)
    observed_t = observed_state.statistic(cfg.sided)

    base_state = observed_state.copy()
    for i, j in sigmas[0].sorted_swaps():
        base_state.exchange(i, j)

    refs = np.empty(m)
    for idx in range(1, m + 1):
        state = base_state.copy()
        for i, j in sigmas[idx].sorted_swaps():
            state.exchange(i, j)
        refs[idx - 1] = state.statistic(cfg.sided)
        if cfg.debug:
            mapping = compose_with_inverse(sigmas[idx], sigmas[0], sample.n)
            relabeled = permute_labels(labels, mapping)
            direct = _full_eval(sample, relabeled, kmat, cfg)
            if abs(direct - refs[idx - 1]) > _PATH_CHECK_TOL:
                raise AssertionError(
                    f"incremental path evaluation drifted: {refs[idx - 1]} vs {direct}"
                )

    return _assemble_result(observed_t, refs, cfg, sample, design.max_disjoint_swaps, kmat)


def run_full_test(sample: PooledSample, labels: LabelState, cfg: TestConfig) -> TestResult:
    """Classical full-relabeling permutation test, with the same
    sigma_m o sigma_0^{-1} construction (valid for any fixed set, including
    the full symmetric group)."""
    root = as_seed_sequence(cfg.seed)
    m = cfg.n_perms
    n = sample.n
    gens = [as_generator(s) for s in root.spawn(m + 1)]
    perms = [g.permutation(n) for g in gens]

    kmat = stats.gaussian_kernel_matrix(sample, cfg.bandwidth) if cfg.statistic == MMD2 else None
    observed_t = _full_eval(sample, labels, kmat, cfg)

    p0 = perms[0]
    a_masks = np.empty((n, m), dtype=bool)
    ref_labelings = []
    inv = np.empty(n, dtype=np.intp)
    for idx in range(1, m + 1):
        # Labeling induced by the data permutation sigma_m o sigma_0^{-1}.
        inv[perms[idx]] = np.arange(n)
        codes = labels.codes[p0[inv]]
        a_masks[:, idx - 1] = codes == LABEL_A
        if cfg.debug:
            ref_labelings.append(LabelState(codes))

    if cfg.statistic == MEAN_DIFF:
        deltas = stats.mean_diff_batch(sample, a_masks)
        refs = np.array([stats.mean_diff_statistic(dv, cfg.sided) for dv in deltas])
    else:
        refs = stats.mmd2_batch(kmat, a_masks)

    if cfg.debug:
        for idx, lab in enumerate(ref_labelings):
            direct = _full_eval(sample, lab, kmat, cfg)
            if abs(direct - refs[idx]) > _PATH_CHECK_TOL:
                raise AssertionError(f"batched evaluation drifted: {refs[idx]} vs {direct}")

    return _assemble_result(observed_t, refs, cfg, sample, None, kmat)


def run_test(sample: PooledSample, labels: LabelState, cfg: TestConfig) -> TestResult:
    if cfg.scheme == FULL_RELABEL:
        return run_full_test(sample, labels, cfg)
    return run_restricted_test(sample, labels, cfg)


def _assemble_result(observed_t, refs, cfg, sample, l_max, kmat) -> TestResult:
    p = p_value(observed_t, refs)
    return TestResult(
        observed_t=float(observed_t),
        p_value=p,
        perm_stats=refs,
        reject=p <= cfg.alpha,
        critical_value_empirical=empirical_critical_value(observed_t, refs, cfg.alpha),
        statistic=cfg.statistic,
        scheme=cfg.scheme,
        n1=sample.n1,
        n2=sample.n2,
        l_max=l_max,
        bandwidth=None if kmat is None else kmat.bandwidth,
    )
