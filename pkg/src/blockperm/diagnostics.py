"""Data-dependent tail diagnostics: increment moments, feasibility, and bounds.

Everything here is computable from the admissible swap set at the observed
labeling: the one-swap increment variance v* and magnitude bound M, their
ratio r = v*/M^2, the representative-ratio feasibility threshold, Freedman-
style tail bounds along swap paths, a variance-term-only quantile bound, and
Monte Carlo variance comparisons between the restricted and full schemes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace

import numpy as np

from . import permtest, sampler, stats
from .blockdesign import BlockDesign, SwapSet
from .core import LABEL_A, LabelState, PooledSample
from .errors import DegenerateDiagnosticsError, EmptySwapSetError
from .rng import as_generator, as_seed_sequence

_ENUMERATION_CAP = 1_000_000
_SUBSAMPLE_SIZE = 100_000


@dataclass(frozen=True)
class IncrementMoments:
    """First-step moments of the one-swap statistic increment over the swap set."""

    v_star: float
    m_bound: float
    n_pairs: int
    n_evaluated: int
    subsampled: bool

    @property
    def r(self) -> float:
        """v*/M^2, in [0, 1]; NaN when every increment is zero."""
        if self.m_bound == 0.0:
            return float("nan")
        return self.v_star / (self.m_bound * self.m_bound)


def _increment_values(
    swapset: SwapSet,
    sample: PooledSample,
    labels: LabelState,
    statistic: str,
    kmat: stats.KernelMatrix | None = None,
    rng=None,
    max_enumerate: int = _ENUMERATION_CAP,
    subsample_size: int = _SUBSAMPLE_SIZE,
) -> tuple[np.ndarray, bool]:
    """Increment of the test statistic for each admissible swap at the observed labeling.

    For the univariate mean difference this is the signed h (Z_j - Z_i); for
    d > 1 it is the change of ||delta||; for MMD^2 it is psi_b[j] - psi_a[i].
    Enumerates all pairs up to `max_enumerate`, beyond which a uniform
    subsample is used (flagged in the second return value).
    """
    pair_i, pair_j = swapset.pair_i, swapset.pair_j
    subsampled = False
    if pair_i.size > max_enumerate:
        rng = as_generator(rng if rng is not None else 0)
        keep = rng.choice(pair_i.size, size=subsample_size, replace=False)
        pair_i, pair_j = pair_i[keep], pair_j[keep]
        subsampled = True
    if statistic == permtest.MEAN_DIFF:
        zdiff = sample.data[pair_j] - sample.data[pair_i]
        if sample.dim == 1:
            values = sample.h * zdiff[:, 0]
        else:
            delta = stats.mean_diff_full(sample, labels)
            base = np.linalg.norm(delta)
            values = np.linalg.norm(delta + sample.h * zdiff, axis=1) - base
    elif statistic == permtest.MMD2:
        if kmat is None:
            raise ValueError("MMD increments need the kernel matrix")
        state = stats.MMDState(kmat, labels)
        values = state.psi_b_values()[pair_j] - state.psi_a_values()[pair_i]
    else:
        raise ValueError(f"unknown statistic {statistic!r}")
    return values, subsampled


def increment_moments(
    swapset: SwapSet,
    sample: PooledSample,
    labels: LabelState,
    statistic: str = permtest.MEAN_DIFF,
    kmat: stats.KernelMatrix | None = None,
    rng=None,
) -> IncrementMoments:
    """v* = Var_w(increment) under the uniform swap law, M = max |increment|.

    For the univariate mean difference v* equals h^2 Var_w(Z_J - Z_I) exactly.
    """
    if swapset.n_pairs == 0:
        raise EmptySwapSetError("no admissible swaps")
    values, subsampled = _increment_values(swapset, sample, labels, statistic, kmat, rng)
    return IncrementMoments(
        v_star=float(values.var()),
        m_bound=float(np.abs(values).max()),
        n_pairs=swapset.n_pairs,
        n_evaluated=values.size,
        subsampled=subsampled,
    )


def tau_squared(
    kmat: stats.KernelMatrix, labels: LabelState, design: BlockDesign
) -> tuple[float, float]:
    """Finite-population variances of the psi scores over the representative pools.

    tau_A^2 varies I uniformly over the A-labeled representatives, tau_B^2
    over the B-labeled ones.  Their sum is the one-swap MMD^2 increment
    variance when the two endpoints are drawn independently.
    """
    rep = design.rep_mask()
    state = stats.MMDState(kmat, labels)
    pool_a = np.flatnonzero(labels.mask_a & rep)
    pool_b = np.flatnonzero(labels.mask_b & rep)
    if pool_a.size == 0 or pool_b.size == 0:
        raise DegenerateDiagnosticsError("a representative pool has no points of one group")
    tau_a2 = float(state.psi_a_values()[pool_a].var())
    tau_b2 = float(state.psi_b_values()[pool_b].var())
    return tau_a2, tau_b2


def rho_feasibility(r: float, n: int, alpha: float, rho: float | None = None):
    """Smallest representative ratio keeping the tail in the variance regime.

    rho_min = (8/9) log(1/alpha) / (r N).  Returns (rho_min, feasible) where
    `feasible` says whether the supplied rho clears the threshold (None when
    rho is not given).
    """
    if r <= 0.0 or not np.isfinite(r):
        raise DegenerateDiagnosticsError(f"variance ratio r must be positive, got {r}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    rho_min = (8.0 / 9.0) * math.log(1.0 / alpha) / (r * n)
    feasible = None if rho is None else bool(rho >= rho_min)
    return rho_min, feasible


def rho_recommend(rho_min: float, c: float = 1.35) -> float:
    """Recommended working ratio c * rho_min (c in [1.2, 1.5]), clamped to 1."""
    if not np.isfinite(rho_min) or rho_min <= 0.0:
        raise ValueError(f"rho_min must be positive, got {rho_min}")
    return min(c * rho_min, 1.0)


@dataclass(frozen=True)
class FreedmanTail:
    """Tail bounds for a length-L path of bounded-variance increments at level s."""

    bernstein: float
    bernstein_rho_n: float | None
    min_trick: float


def freedman_tail(
    s: float, l_steps: int, v_star: float, m_bound: float, rho_n: float | None = None
) -> FreedmanTail:
    """Evaluate exp(-s^2 / (2 (L v* + M s / 3))) and companions.

    Also returns the looser form with L replaced by rho N / 2 (when rho_n is
    supplied) and the min-trick bound
    exp(-(1/4) min(s^2 / (L v*), 3 s / M)).
    """
    if s <= 0.0:
        raise ValueError(f"s must be positive, got {s}")
    if v_star < 0.0 or m_bound < 0.0:
        raise ValueError("v_star and m_bound must be nonnegative")
    if v_star == 0.0 and m_bound == 0.0:
        raise ValueError("v_star and m_bound cannot both be zero")
    if l_steps < 0:
        raise ValueError("path length must be nonnegative")

    def _exp_ratio(num: float, den: float) -> float:
        if den == 0.0:
            return 0.0
        return math.exp(-num / den)

    bernstein = _exp_ratio(s * s, 2.0 * (l_steps * v_star + m_bound * s / 3.0))
    looser = None
    if rho_n is not None:
        looser = _exp_ratio(s * s, rho_n * v_star + (2.0 / 3.0) * m_bound * s)
    sub_gaussian = s * s / (l_steps * v_star) if l_steps * v_star > 0.0 else math.inf
    linear = 3.0 * s / m_bound if m_bound > 0.0 else math.inf
    min_trick = math.exp(-0.25 * min(sub_gaussian, linear))
    return FreedmanTail(bernstein=bernstein, bernstein_rho_n=looser, min_trick=min_trick)


def quantile_bound(l_steps: int, v_star: float, alpha: float, mean_t: float) -> float:
    """Variance-regime bound on the upper (1-alpha) reference quantile:
    mean_t + 2 sqrt(L v* log(1/alpha))."""
    if v_star < 0.0:
        raise ValueError("v_star must be nonnegative")
    if l_steps < 0:
        raise ValueError("path length must be nonnegative")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    return mean_t + 2.0 * math.sqrt(l_steps * v_star * math.log(1.0 / alpha))


def in_variance_regime(l_steps: int, v_star: float, alpha: float, m_bound: float) -> bool:
    """Whether log(1/alpha) <= 9 L v* / (4 M^2), i.e. the quantile bound applies."""
    if m_bound == 0.0:
        return True
    return math.log(1.0 / alpha) <= 9.0 * l_steps * v_star / (4.0 * m_bound * m_bound)


@dataclass(frozen=True)
class VarianceComparison:
    var_rest: float
    var_full: float
    var_full_formula: float | None
    ratio: float
    rest_exhaustive: bool
    replicates: int


def variance_comparison(
    sample: PooledSample,
    labels: LabelState,
    cfg: permtest.TestConfig,
    replicates: int = 500,
    prepared=None,
) -> VarianceComparison:
    """Reference-statistic variance under the restricted sampler vs full relabeling.

    For the single-swap scheme with a modest swap set the restricted variance
    is computed exhaustively over all admissible swaps (exactly the one-swap
    law); otherwise both sides are Monte Carlo over `replicates` draws.  The
    univariate mean-difference closed form h * S^2 is reported alongside when
    it applies (it describes the signed statistic, so it is only attached in
    one-sided mode).
    """
    if replicates < 100:
        raise ValueError("need at least 100 replicates for stable variances")
    root = as_seed_sequence(cfg.seed)
    design_seed, rest_seed, full_seed = root.spawn(3)
    if prepared is None:
        design, swapset, kmat = permtest.prepare_design(sample, labels, cfg, seed=design_seed)
    else:
        design, swapset, kmat = prepared

    rest_exhaustive = (
        cfg.scheme == permtest.RESTRICTED_SINGLE_SWAP and swapset.n_pairs <= 200_000
    )
    if rest_exhaustive:
        values, _ = _increment_values(swapset, sample, labels, cfg.statistic, kmat)
        if cfg.statistic == permtest.MEAN_DIFF and sample.dim == 1:
            base = stats.mean_diff_full(sample, labels)[0]
            after = base + values
            stat_values = np.abs(after) if cfg.sided == "two" else after
        else:
            base = _observed_statistic(sample, labels, cfg, kmat)
            stat_values = base + values
        var_rest = float(stat_values.var())
    else:
        draws = _restricted_draws(swapset, cfg, rest_seed, replicates)
        t_values = np.empty(replicates)
        state0 = _base_state(sample, labels, cfg, kmat)
        for t, sigma in enumerate(draws):
            state = state0.copy()
            for i, j in sigma.sorted_swaps():
                state.exchange(i, j)
            t_values[t] = state.statistic(cfg.sided)
        var_rest = float(t_values.var(ddof=1))

    rng = as_generator(full_seed)
    relabelings = rng.permuted(np.tile(labels.codes, (replicates, 1)), axis=1)
    a_masks = (relabelings == LABEL_A).T
    if cfg.statistic == permtest.MEAN_DIFF:
        deltas = stats.mean_diff_batch(sample, a_masks)
        full_values = np.array([stats.mean_diff_statistic(dv, cfg.sided) for dv in deltas])
    else:
        full_values = stats.mmd2_batch(kmat, a_masks)
    var_full = float(full_values.var(ddof=1))

    formula = None
    if cfg.statistic == permtest.MEAN_DIFF and sample.dim == 1 and cfg.sided == "one":
        formula = stats.full_relabel_variance_mean(sample)

    ratio = var_rest / var_full if var_full > 0.0 else float("nan")
    return VarianceComparison(
        var_rest=var_rest,
        var_full=var_full,
        var_full_formula=formula,
        ratio=ratio,
        rest_exhaustive=rest_exhaustive,
        replicates=replicates,
    )


def _observed_statistic(sample, labels, cfg, kmat) -> float:
    if cfg.statistic == permtest.MEAN_DIFF:
        return stats.mean_diff_statistic(stats.mean_diff_full(sample, labels), cfg.sided)
    return stats.mmd2_full(kmat, labels)


def _base_state(sample, labels, cfg, kmat):
    if cfg.statistic == permtest.MEAN_DIFF:
        return stats.MeanDiffState(sample, labels)
    return stats.MMDState(kmat, labels)


def _restricted_draws(swapset, cfg, seed, count):
    if cfg.scheme == permtest.RESTRICTED_MATCHING:
        return sampler.sample_restricted_batch(swapset, count, seed)
    rng = as_generator(seed)
    return [sampler.sample_single_swap(swapset, rng, mode=sampler.SWAP_ONLY) for _ in range(count)]


def path_prefix_v_star(
    swapset: SwapSet,
    sample: PooledSample,
    labels: LabelState,
    cfg: permtest.TestConfig,
    trials: int = 100,
    kmat: stats.KernelMatrix | None = None,
    seed=None,
) -> float:
    """Stress estimate of v*: max increment variance over random path prefixes.

    Each trial samples a restricted permutation, applies a uniformly chosen
    prefix of its swaps in random order, and measures the increment variance
    over the admissible swaps still disjoint from the prefix (those keep
    their original orientation).  The first-step value (empty prefix) is
    included, so the result is always >= the observed-labeling v*.
    """
    rng = as_generator(seed if seed is not None else cfg.seed)
    best = 0.0
    base = _base_state(sample, labels, cfg, kmat)
    pair_i, pair_j = swapset.pair_i, swapset.pair_j
    for _ in range(trials):
        sigma = sampler.sample_restricted(swapset, rng)
        swaps = sigma.sorted_swaps()
        rng.shuffle(swaps)
        k = int(rng.integers(0, len(swaps) + 1))
        state = base.copy()
        used: set[int] = set()
        for i, j in swaps[:k]:
            state.exchange(i, j)
            used.add(i)
            used.add(j)
        if used:
            used_arr = np.array(sorted(used))
            valid = ~(np.isin(pair_i, used_arr) | np.isin(pair_j, used_arr))
        else:
            valid = np.ones(pair_i.size, dtype=bool)
        if valid.sum() < 2:
            continue
        vi, vj = pair_i[valid], pair_j[valid]
        if cfg.statistic == permtest.MEAN_DIFF:
            zdiff = sample.data[vj] - sample.data[vi]
            if sample.dim == 1:
                values = sample.h * zdiff[:, 0]
            else:
                delta = state.delta()
                values = np.linalg.norm(delta + sample.h * zdiff, axis=1) - np.linalg.norm(delta)
        else:
            values = state.psi_b_values()[vj] - state.psi_a_values()[vi]
        best = max(best, float(values.var()))
    return best


@dataclass(frozen=True)
class DiagnosticsReport:
    statistic: str
    scheme: str
    n1: int
    n2: int
    n_pairs: int
    subsampled: bool
    v_star: float
    v_star_stress: float
    m_bound: float
    r: float
    l_max: int
    rho: float
    rho_min: float
    rho_opt: float
    feasible: bool
    variance_regime: bool
    mean_ref: float
    q_rest_bound: float
    q_full_chebyshev: float
    tau_a2: float | None
    tau_b2: float | None
    var_rest_empirical: float
    var_full_empirical: float
    var_full_formula: float | None
    var_ratio: float
    bandwidth: float | None
    degenerate: bool

    def lines(self) -> list[str]:
        """key=value lines in field order, for the CLI report block."""
        out = []
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif value is None:
                value = "nan"
            elif isinstance(value, float):
                value = f"{value:.10g}"
            out.append(f"{name}={value}")
        return out


def diagnose(
    sample: PooledSample,
    labels: LabelState,
    cfg: permtest.TestConfig,
    replicates: int = 200,
) -> DiagnosticsReport:
    """Full diagnostics block for one dataset and configuration."""
    root = as_seed_sequence(cfg.seed)
    design_seed, stress_seed, moments_seed = root.spawn(3)
    design, swapset, kmat = permtest.prepare_design(sample, labels, cfg, seed=design_seed)
    moments = increment_moments(
        swapset, sample, labels, cfg.statistic, kmat, rng=moments_seed
    )
    l_max = design.max_disjoint_swaps
    degenerate = moments.m_bound == 0.0

    if degenerate:
        rho_min, rho_opt, feasible = float("nan"), float("nan"), False
    else:
        rho_min, feasible = rho_feasibility(moments.r, sample.n, cfg.alpha, rho=cfg.rho)
        rho_opt = rho_recommend(rho_min)

    if cfg.scheme == permtest.FULL_RELABEL:
        cfg = dc_replace(cfg, scheme=permtest.RESTRICTED_MATCHING)
    result = permtest.run_restricted_test(sample, labels, cfg)
    mean_ref = float(result.perm_stats.mean())
    q_rest = quantile_bound(l_max, moments.v_star, cfg.alpha, mean_ref)
    regime = in_variance_regime(l_max, moments.v_star, cfg.alpha, moments.m_bound)

    comparison = variance_comparison(
        sample, labels, cfg, replicates=replicates, prepared=(design, swapset, kmat)
    )
    q_full_chebyshev = mean_ref + math.sqrt(comparison.var_full / cfg.alpha)

    taus = (None, None)
    if cfg.statistic == permtest.MMD2:
        taus = tau_squared(kmat, labels, design)

    stress = path_prefix_v_star(
        swapset, sample, labels, cfg, trials=100, kmat=kmat, seed=stress_seed
    )

    return DiagnosticsReport(
        statistic=cfg.statistic,
        scheme=cfg.scheme,
        n1=sample.n1,
        n2=sample.n2,
        n_pairs=swapset.n_pairs,
        subsampled=moments.subsampled,
        v_star=moments.v_star,
        v_star_stress=max(stress, moments.v_star),
        m_bound=moments.m_bound,
        r=moments.r,
        l_max=l_max,
        rho=cfg.rho,
        rho_min=rho_min,
        rho_opt=rho_opt,
        feasible=feasible,
        variance_regime=regime,
        mean_ref=mean_ref,
        q_rest_bound=q_rest,
        q_full_chebyshev=q_full_chebyshev,
        tau_a2=taus[0],
        tau_b2=taus[1],
        var_rest_empirical=comparison.var_rest,
        var_full_empirical=comparison.var_full,
        var_full_formula=comparison.var_full_formula,
        var_ratio=comparison.ratio,
        bandwidth=None if kmat is None else kmat.bandwidth,
        degenerate=degenerate,
    )
