"""Two-sample statistics with exact full evaluation and exact one-swap updates.

Two statistics are supported: the group-mean difference and the unbiased
squared maximum mean discrepancy (MMD^2).  Each comes in three forms:

* a from-scratch evaluation (`mean_diff_full`, `mmd2_full`),
* an incremental state (`MeanDiffState`, `MMDState`) that applies a label
  cross-swap in O(d) / O(N) and exposes the closed-form increment the swap
  induces, and
* a batched evaluation over many labelings at once (`mean_diff_batch`,
  `mmd2_batch`) used by the full-relabeling reference and by test oracles.

The increment identities are exact, not approximations: swapping i in A with
j in B changes the mean difference by h (Z_j - Z_i) with h = 1/n1 + 1/n2, and
changes MMD^2 by psi_j^(B->A) - psi_i^(A->B) where the psi scores compare a
point's within-group and cross-group kernel averages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .core import LABEL_A, LABEL_B, LabelState, PooledSample, effective_resolution
from .errors import DegenerateGroupError, SwapOrientationError

MEDIAN_BANDWIDTH = "median"


# ---------------------------------------------------------------------------
# Mean difference
# ---------------------------------------------------------------------------

def mean_diff_full(sample: PooledSample, labels: LabelState) -> np.ndarray:
    """Group-mean difference Z_bar_A - Z_bar_B, computed from scratch.

    Returns a vector of length d.
    """
    _check_pairing(sample, labels)
    mask = labels.mask_a
    return sample.data[mask].mean(axis=0) - sample.data[~mask].mean(axis=0)


def mean_diff_statistic(delta: np.ndarray, sided: str = "two") -> float:
    """Scalarize a mean-difference vector.

    For d > 1 the statistic is the Euclidean norm.  For d = 1 it is |delta|
    in two-sided mode and the signed value in one-sided mode.
    """
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    if sided not in ("one", "two"):
        raise ValueError(f"sided must be 'one' or 'two', got {sided!r}")
    if delta.size == 1:
        value = float(delta[0])
        return abs(value) if sided == "two" else value
    return float(np.linalg.norm(delta))


class MeanDiffState:
    """Running group sums supporting O(d) cross-swap updates.

    Holds its own copy of the label codes so orientation checks and commits
    stay consistent; the observation matrix is shared, never copied.
    """

    __slots__ = ("data", "codes", "sum_a", "sum_b", "n1", "n2", "h")

    def __init__(self, sample: PooledSample, labels: LabelState):
        _check_pairing(sample, labels)
        self.data = sample.data
        self.codes = labels.codes.copy()
        mask = labels.mask_a
        self.sum_a = sample.data[mask].sum(axis=0)
        self.sum_b = sample.data[~mask].sum(axis=0)
        self.n1 = sample.n1
        self.n2 = sample.n2
        self.h = sample.h

    def copy(self) -> "MeanDiffState":
        new = object.__new__(MeanDiffState)
        new.data = self.data
        new.codes = self.codes.copy()
        new.sum_a = self.sum_a.copy()
        new.sum_b = self.sum_b.copy()
        new.n1 = self.n1
        new.n2 = self.n2
        new.h = self.h
        return new

    def labels(self) -> LabelState:
        return LabelState(self.codes.copy())

    def delta(self) -> np.ndarray:
        return self.sum_a / self.n1 - self.sum_b / self.n2

    def _require_oriented(self, i: int, j: int) -> None:
        if self.codes[i] != LABEL_A or self.codes[j] != LABEL_B:
            raise SwapOrientationError(f"swap ({i}, {j}) is not (A, B)-oriented")

    def increment(self, i: int, j: int) -> np.ndarray:
        """Change of delta() if (i, j) were swapped: h * (Z_j - Z_i)."""
        self._require_oriented(i, j)
        return self.h * (self.data[j] - self.data[i])

    def commit_swap(self, i: int, j: int) -> None:
        """Apply the cross-swap (i in A) <-> (j in B)."""
        self._require_oriented(i, j)
        diff = self.data[j] - self.data[i]
        self.sum_a = self.sum_a + diff
        self.sum_b = self.sum_b - diff
        self.codes[i] = LABEL_B
        self.codes[j] = LABEL_A

    def exchange(self, i: int, j: int) -> None:
        """Exchange labels of i and j regardless of orientation (no-op if equal)."""
        ci, cj = self.codes[i], self.codes[j]
        if ci == cj:
            return
        if ci == LABEL_A:
            self.commit_swap(i, j)
        else:
            self.commit_swap(j, i)

    def statistic(self, sided: str = "two") -> float:
        return mean_diff_statistic(self.delta(), sided)


def mean_diff_increment(
    state: MeanDiffState, sample: PooledSample, i: int, j: int
) -> np.ndarray:
    """Closed-form change of the mean difference under the cross-swap (i, j).

    Equals mean_diff_full(after) - mean_diff_full(before) exactly; the caller
    may then commit the swap on the state.
    """
    if state.data is not sample.data and not np.array_equal(state.data, sample.data):
        raise ValueError("state was built from a different sample")
    return state.increment(i, j)


def mean_diff_batch(sample: PooledSample, a_masks: np.ndarray) -> np.ndarray:
    """Mean differences for many labelings at once.

    Args:
        a_masks: (N, M) boolean matrix; column m is the A-mask of labeling m.
            Every column must contain exactly n1 True entries.

    Returns:
        (M, d) matrix of mean-difference vectors.
    """
    a_masks = np.asarray(a_masks, dtype=bool)
    if a_masks.ndim != 2 or a_masks.shape[0] != sample.n:
        raise ValueError(f"a_masks must be (N, M) with N={sample.n}")
    counts = a_masks.sum(axis=0)
    if not np.all(counts == sample.n1):
        raise ValueError("every labeling must have exactly n1 A-labels")
    u = a_masks.astype(float)
    weights = u / sample.n1 - (1.0 - u) / sample.n2
    return weights.T @ sample.data


# ---------------------------------------------------------------------------
# Gaussian kernel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelMatrix:
    """A symmetric N x N matrix of kernel evaluations.

    `bandwidth` is the Gaussian scale when the matrix came from
    :func:`gaussian_kernel_matrix`, and None for externally supplied kernels
    (e.g. a linear kernel built in tests).
    """

    matrix: np.ndarray
    bandwidth: float | None = None

    def __post_init__(self) -> None:
        k = np.array(self.matrix, dtype=float)
        if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape[0] < 1:
            raise ValueError("kernel matrix must be square and non-empty")
        if not np.all(np.isfinite(k)):
            raise ValueError("kernel matrix must be finite")
        if not np.allclose(k, k.T, rtol=0.0, atol=1e-12):
            raise ValueError("kernel matrix must be symmetric")
        k.setflags(write=False)
        object.__setattr__(self, "matrix", k)

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])


def median_heuristic_bandwidth(data: np.ndarray) -> float:
    """Median of the nonzero pairwise Euclidean distances; 1.0 if all coincide."""
    dists = pdist(np.asarray(data, dtype=float))
    dists = dists[dists > 0.0]
    if dists.size == 0:
        return 1.0
    return float(np.median(dists))


def gaussian_kernel_matrix(
    sample: PooledSample, bandwidth: float | str = MEDIAN_BANDWIDTH
) -> KernelMatrix:
    """K[i, j] = exp(-||Z_i - Z_j||^2 / (2 bandwidth^2)).

    `bandwidth` may be a positive number or the string "median", which
    resolves to the median heuristic over pairwise distances.
    """
    if isinstance(bandwidth, str):
        if bandwidth != MEDIAN_BANDWIDTH:
            raise ValueError(f"unknown bandwidth rule {bandwidth!r}")
        bw = median_heuristic_bandwidth(sample.data)
    else:
        bw = float(bandwidth)
        if not np.isfinite(bw) or bw <= 0.0:
            raise ValueError(f"bandwidth must be positive, got {bandwidth!r}")
    sq = squareform(pdist(sample.data, "sqeuclidean"))
    return KernelMatrix(np.exp(-sq / (2.0 * bw * bw)), bw)


# ---------------------------------------------------------------------------
# Unbiased MMD^2
# ---------------------------------------------------------------------------

def _mmd_counts(kmat: KernelMatrix, labels: LabelState) -> tuple[int, int]:
    if labels.n != kmat.n:
        raise ValueError(f"labels have length {labels.n}, kernel is {kmat.n} x {kmat.n}")
    n1, n2 = labels.count_a, labels.count_b
    if n1 < 2 or n2 < 2:
        raise DegenerateGroupError(f"unbiased MMD^2 needs n1, n2 >= 2, got ({n1}, {n2})")
    return n1, n2


def mmd2_full(kmat: KernelMatrix, labels: LabelState) -> float:
    """Unbiased three-block MMD^2 estimator, computed from scratch in O(N^2)."""
    n1, n2 = _mmd_counts(kmat, labels)
    k = kmat.matrix
    ma, mb = labels.mask_a, labels.mask_b
    kaa = k[np.ix_(ma, ma)]
    kbb = k[np.ix_(mb, mb)]
    within_a = kaa.sum() - np.trace(kaa)
    within_b = kbb.sum() - np.trace(kbb)
    cross = k[np.ix_(ma, mb)].sum()
    return float(
        within_a / (n1 * (n1 - 1)) + within_b / (n2 * (n2 - 1)) - 2.0 * cross / (n1 * n2)
    )


def psi_a_to_b(kmat: KernelMatrix, labels: LabelState, i: int) -> float:
    """Contribution score of A-point i: within-A minus cross kernel averages.

    psi_i = 2/(n1(n1-1)) sum_{i' in A \\ {i}} K[i, i']
          - 2/(n1 n2)    sum_{j' in B} K[i, j'].
    """
    n1, n2 = _mmd_counts(kmat, labels)
    if not labels.is_a(i):
        raise SwapOrientationError(f"index {i} is not A-labeled")
    row = kmat.matrix[i]
    within = row[labels.mask_a].sum() - row[i]
    cross = row[labels.mask_b].sum()
    return float(2.0 * within / (n1 * (n1 - 1)) - 2.0 * cross / (n1 * n2))


def psi_b_to_a(kmat: KernelMatrix, labels: LabelState, j: int) -> float:
    """Mirror of :func:`psi_a_to_b` with the roles of A and B exchanged."""
    n1, n2 = _mmd_counts(kmat, labels)
    if labels.is_a(j):
        raise SwapOrientationError(f"index {j} is not B-labeled")
    row = kmat.matrix[j]
    within = row[labels.mask_b].sum() - row[j]
    cross = row[labels.mask_a].sum()
    return float(2.0 * within / (n2 * (n2 - 1)) - 2.0 * cross / (n1 * n2))


def mmd_one_swap_increment(kmat: KernelMatrix, labels: LabelState, i: int, j: int) -> float:
    """Exact change of mmd2_full under the cross-swap (i in A) <-> (j in B)."""
    return psi_b_to_a(kmat, labels, j) - psi_a_to_b(kmat, labels, i)


class MMDState:
    """Rowsum bookkeeping for MMD^2 with O(N) cross-swap commits and O(1) psi scores.

    Maintains, for every index l, the kernel row sums over the current A and
    B groups, plus the three scalar U-statistic blocks.  The partition
    identity rowsum_a[l] + rowsum_b[l] = sum_j K[l, j] holds at all times.
    """

    __slots__ = (
        "kernel", "diag", "codes", "n1", "n2",
        "rowsum_a", "rowsum_b", "within_a", "within_b", "cross",
    )

    def __init__(self, kmat: KernelMatrix, labels: LabelState):
        n1, n2 = _mmd_counts(kmat, labels)
        self.kernel = kmat.matrix
        self.diag = np.diag(kmat.matrix).copy()
        self.codes = labels.codes.copy()
        self.n1 = n1
        self.n2 = n2
        ma = labels.mask_a
        self.rowsum_a = kmat.matrix[:, ma].sum(axis=1)
        self.rowsum_b = kmat.matrix[:, ~ma].sum(axis=1)
        self._refresh_blocks()

    def _refresh_blocks(self) -> None:
        ma = self.codes == LABEL_A
        self.within_a = float((self.rowsum_a[ma] - self.diag[ma]).sum())
        self.within_b = float((self.rowsum_b[~ma] - self.diag[~ma]).sum())
        self.cross = float(self.rowsum_b[ma].sum())

    def copy(self) -> "MMDState":
        new = object.__new__(MMDState)
        new.kernel = self.kernel
        new.diag = self.diag
        new.codes = self.codes.copy()
        new.n1 = self.n1
        new.n2 = self.n2
        new.rowsum_a = self.rowsum_a.copy()
        new.rowsum_b = self.rowsum_b.copy()
        new.within_a = self.within_a
        new.within_b = self.within_b
        new.cross = self.cross
        return new

    def labels(self) -> LabelState:
        return LabelState(self.codes.copy())

    def mmd2(self) -> float:
        n1, n2 = self.n1, self.n2
        return (
            self.within_a / (n1 * (n1 - 1))
            + self.within_b / (n2 * (n2 - 1))
            - 2.0 * self.cross / (n1 * n2)
        )

    def psi_a(self, i: int) -> float:
        if self.codes[i] != LABEL_A:
            raise SwapOrientationError(f"index {i} is not A-labeled")
        n1, n2 = self.n1, self.n2
        return float(
            2.0 * (self.rowsum_a[i] - self.diag[i]) / (n1 * (n1 - 1))
            - 2.0 * self.rowsum_b[i] / (n1 * n2)
        )

    def psi_b(self, j: int) -> float:
        if self.codes[j] != LABEL_B:
            raise SwapOrientationError(f"index {j} is not B-labeled")
        n1, n2 = self.n1, self.n2
        return float(
            2.0 * (self.rowsum_b[j] - self.diag[j]) / (n2 * (n2 - 1))
            - 2.0 * self.rowsum_a[j] / (n1 * n2)
        )

    def psi_a_values(self) -> np.ndarray:
        """psi_a for every index, valid at the currently A-labeled positions."""
        n1, n2 = self.n1, self.n2
        return 2.0 * (self.rowsum_a - self.diag) / (n1 * (n1 - 1)) - 2.0 * self.rowsum_b / (n1 * n2)

    def psi_b_values(self) -> np.ndarray:
        n1, n2 = self.n1, self.n2
        return 2.0 * (self.rowsum_b - self.diag) / (n2 * (n2 - 1)) - 2.0 * self.rowsum_a / (n1 * n2)

    def increment(self, i: int, j: int) -> float:
        """Change of mmd2() if (i, j) were swapped: psi_b(j) - psi_a(i)."""
        return self.psi_b(j) - self.psi_a(i)

    def commit_swap(self, i: int, j: int) -> None:
        if self.codes[i] != LABEL_A or self.codes[j] != LABEL_B:
            raise SwapOrientationError(f"swap ({i}, {j}) is not (A, B)-oriented")
        col_i = self.kernel[:, i]
        col_j = self.kernel[:, j]
        self.rowsum_a += col_j - col_i
        self.rowsum_b += col_i - col_j
        self.codes[i] = LABEL_B
        self.codes[j] = LABEL_A
        self._refresh_blocks()

    def exchange(self, i: int, j: int) -> None:
        ci, cj = self.codes[i], self.codes[j]
        if ci == cj:
            return
        if ci == LABEL_A:
            self.commit_swap(i, j)
        else:
            self.commit_swap(j, i)

    def statistic(self, sided: str = "two") -> float:
        # MMD^2 is one-sided by construction; `sided` is accepted for interface
        # symmetry with the mean difference and ignored.
        return self.mmd2()


def mmd2_batch(kmat: KernelMatrix, a_masks: np.ndarray) -> np.ndarray:
    """Unbiased MMD^2 for many labelings at once via one matrix product.

    Args:
        a_masks: (N, M) boolean matrix of A-masks, each column with the same
            number n1 >= 2 of True entries (and n2 = N - n1 >= 2).

    Returns:
        length-M vector of statistics, exactly equal to looping mmd2_full.
    """
    a_masks = np.asarray(a_masks, dtype=bool)
    k = kmat.matrix
    n = kmat.n
    if a_masks.ndim != 2 or a_masks.shape[0] != n:
        raise ValueError(f"a_masks must be (N, M) with N={n}")
    counts = a_masks.sum(axis=0)
    if a_masks.shape[1] == 0:
        return np.empty(0)
    n1 = int(counts[0])
    if not np.all(counts == n1):
        raise ValueError("all labelings must have the same group sizes")
    n2 = n - n1
    if n1 < 2 or n2 < 2:
        raise DegenerateGroupError(f"unbiased MMD^2 needs n1, n2 >= 2, got ({n1}, {n2})")
    u = a_masks.astype(float)
    ku = k @ u
    uku = np.einsum("nm,nm->m", u, ku)
    k1 = k.sum(axis=1)
    uk1 = u.T @ k1
    diag = np.diag(k)
    diag_a = u.T @ diag
    total = k1.sum()
    trace = diag.sum()
    s_aa = uku - diag_a
    s_bb = total - 2.0 * uk1 + uku - (trace - diag_a)
    s_ab = uk1 - uku
    return s_aa / (n1 * (n1 - 1)) + s_bb / (n2 * (n2 - 1)) - 2.0 * s_ab / (n1 * n2)


# ---------------------------------------------------------------------------
# Finite-population variance identities
# ---------------------------------------------------------------------------

def pooled_variance(sample: PooledSample):
    """Pooled variance S^2 = (1/(N-1)) sum (Z - Z_bar)^2, coordinatewise for d > 1."""
    if sample.n < 2:
        raise ValueError("pooled variance needs N >= 2")
    v = sample.data.var(axis=0, ddof=1)
    return float(v[0]) if sample.dim == 1 else v


def full_relabel_variance_mean(sample: PooledSample) -> float:
    """Exact variance of the mean difference under uniform full relabeling (d = 1).

    Finite-population sampling gives Var(delta) = h * S^2 with the
    (N-1)-divisor pooled variance S^2, equivalently h * N/(N-1) times the
    N-divisor population variance.  Matches exhaustive enumeration over all
    C(N, n1) relabelings to machine precision.
    """
    if sample.dim != 1:
        raise ValueError("closed form is univariate; use empirical variance for d > 1")
    if sample.n < 2:
        raise ValueError("needs N >= 2")
    return sample.h * pooled_variance(sample)


def _check_pairing(sample: PooledSample, labels: LabelState) -> None:
    if labels.n != sample.n:
        raise ValueError(f"labels have length {labels.n}, sample has {sample.n} rows")
    if labels.count_a != sample.n1 or labels.count_b != sample.n2:
        raise ValueError(
            f"labels have ({labels.count_a}, {labels.count_b}) group counts, "
            f"sample declares ({sample.n1}, {sample.n2})"
        )
