"""Pooled-sample data model: observations, group labels, and swap-set permutations.

The central convention of the package is that observations never move.  A
permutation acts on the *labels*: a cross-swap (i, j) exchanges the group
membership of rows i and j, and a general index permutation relabels the
rows accordingly.  Every statistic is a function of (data, labels), so the
two views coincide.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DisjointnessError, SwapOrientationError

LABEL_A = 0
LABEL_B = 1

_LETTER_TO_CODE = {"A": LABEL_A, "B": LABEL_B}
_CODE_TO_LETTER = {LABEL_A: "A", LABEL_B: "B"}


def effective_resolution(n1: int, n2: int) -> float:
    """Return h = 1/n1 + 1/n2, the scale of a single cross-swap's effect.

    Raises:
        ValueError: if either group size is < 1.
    """
    if n1 < 1 or n2 < 1:
        raise ValueError(f"group sizes must be >= 1, got n1={n1}, n2={n2}")
    return 1.0 / n1 + 1.0 / n2


@dataclass(frozen=True)
class PooledSample:
    """Both groups stacked into one immutable (N, d) matrix.

    Attributes:
        data: observation matrix, one row per point.  A 1-D input is
            promoted to a single column.
        n1: number of group-A points.
        n2: number of group-B points.

    The matrix is copied and frozen at construction; all entries must be
    finite and N must equal n1 + n2.
    """

    data: np.ndarray
    n1: int
    n2: int

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=float)
        if data.ndim == 1:
            data = data.reshape(-1, 1)
        if data.ndim != 2 or data.shape[1] < 1:
            raise ValueError("data must be an (N, d) matrix with d >= 1")
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError(f"group sizes must be >= 1, got n1={self.n1}, n2={self.n2}")
        if data.shape[0] != self.n1 + self.n2:
            raise ValueError(
                f"data has {data.shape[0]} rows but n1 + n2 = {self.n1 + self.n2}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("observations must be finite (no NaN/Inf)")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])

    @property
    def h(self) -> float:
        return effective_resolution(self.n1, self.n2)


@dataclass(frozen=True)
class LabelState:
    """A length-N assignment of indices to groups A and B.

    Stored as a read-only uint8 vector of LABEL_A / LABEL_B codes.
    """

    codes: np.ndarray

    def __post_init__(self) -> None:
        codes = np.array(self.codes, dtype=np.uint8)
        if codes.ndim != 1 or codes.size == 0:
            raise ValueError("labels must be a non-empty vector")
        if not np.all((codes == LABEL_A) | (codes == LABEL_B)):
            raise ValueError("labels must contain only the codes LABEL_A and LABEL_B")
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

    @classmethod
    def from_letters(cls, letters) -> "LabelState":
        try:
            codes = [_LETTER_TO_CODE[c] for c in letters]
        except KeyError as exc:
            raise ValueError(f"unknown group label {exc.args[0]!r}, expected 'A' or 'B'") from exc
        return cls(np.array(codes, dtype=np.uint8))

    def to_letters(self) -> list[str]:
        return [_CODE_TO_LETTER[int(c)] for c in self.codes]

    @property
    def n(self) -> int:
        return int(self.codes.size)

    @property
    def count_a(self) -> int:
        return int(np.sum(self.codes == LABEL_A))

    @property
    def count_b(self) -> int:
        return int(np.sum(self.codes == LABEL_B))

    @property
    def mask_a(self) -> np.ndarray:
        return self.codes == LABEL_A

    @property
    def mask_b(self) -> np.ndarray:
        return self.codes == LABEL_B

    def indices_a(self) -> np.ndarray:
        return np.flatnonzero(self.codes == LABEL_A)

    def indices_b(self) -> np.ndarray:
        return np.flatnonzero(self.codes == LABEL_B)

    def is_a(self, i: int) -> bool:
        return self.codes[i] == LABEL_A


@dataclass(frozen=True)
class RestrictedPermutation:
    """A set of disjoint transpositions, the only permutations swaps generate.

    The empty set is the identity.  Pairs are stored in (i, j) orientation,
    i.e. i was A-labeled and j B-labeled when the permutation was built, but
    as a permutation of indices a transposition has no orientation.
    """

    swaps: frozenset = frozenset()

    def __post_init__(self) -> None:
        swaps = frozenset((int(i), int(j)) for i, j in self.swaps)
        seen: set[int] = set()
        for i, j in swaps:
            if i == j or i in seen or j in seen:
                raise DisjointnessError(f"swap indices are not disjoint around ({i}, {j})")
            seen.add(i)
            seen.add(j)
        object.__setattr__(self, "swaps", swaps)

    @classmethod
    def identity(cls) -> "RestrictedPermutation":
        return cls(frozenset())

    def __len__(self) -> int:
        return len(self.swaps)

    @property
    def support(self) -> frozenset:
        return frozenset(k for pair in self.swaps for k in pair)

    def sorted_swaps(self) -> list[tuple[int, int]]:
        """Swaps in a deterministic order (set iteration order is not stable)."""
        return sorted(self.swaps)

    def to_array(self, n: int) -> np.ndarray:
        """The permutation as an index array p with p[i] = j, p[j] = i per swap."""
        p = np.arange(n)
        for i, j in self.swaps:
            if i >= n or j >= n:
                raise ValueError(f"swap ({i}, {j}) out of range for n={n}")
            p[i], p[j] = j, i
        return p


def apply_permutation(labels: LabelState, perm: RestrictedPermutation) -> LabelState:
    """Exchange labels for every pair of `perm`, requiring A->B orientation.

    Each (i, j) must currently have labels[i] = A and labels[j] = B.  Returns
    a new LabelState; group counts are preserved exactly.

    Raises:
        SwapOrientationError: if any pair violates the orientation rule.
    """
    codes = labels.codes.copy()
    for i, j in perm.sorted_swaps():
        if codes[i] != LABEL_A or codes[j] != LABEL_B:
            raise SwapOrientationError(
                f"swap ({i}, {j}) requires labels (A, B), got "
                f"({_CODE_TO_LETTER[int(codes[i])]}, {_CODE_TO_LETTER[int(codes[j])]})"
            )
    for i, j in perm.swaps:
        codes[i], codes[j] = codes[j], codes[i]
    return LabelState(codes)


def exchange_labels(labels: LabelState, perm: RestrictedPermutation) -> LabelState:
    """Exchange labels for every pair of `perm` without orientation checks.

    Exchanging two equal labels is a no-op, so this realizes the action of the
    transposition set on an arbitrary labeling (used when composing
    permutations drawn against the observed labeling with other labelings).
    """
    codes = labels.codes.copy()
    for i, j in perm.swaps:
        codes[i], codes[j] = codes[j], codes[i]
    return LabelState(codes)


def compose_with_inverse(
    perm_m: RestrictedPermutation, perm_0: RestrictedPermutation, n: int
) -> np.ndarray:
    """Return sigma_m o sigma_0^{-1} as an explicit index mapping.

    Disjoint-transposition sets are involutions, so sigma_0^{-1} = sigma_0 and
    the composition is p[l] = sigma_m(sigma_0(l)).  The result is a general
    permutation (not necessarily a disjoint-swap set); apply it to labels with
    :func:`permute_labels`.
    """
    pm = perm_m.to_array(n)
    p0 = perm_0.to_array(n)
    return pm[p0]


def permute_labels(labels: LabelState, mapping: np.ndarray) -> LabelState:
    """Relabel under the data permutation `mapping`.

    Permuting the data by a mapping p (row p[l] moves to position l) while
    keeping labels in place is equivalent to keeping the data and giving row k
    the label of position p^{-1}(k); this returns that induced labeling.
    """
    mapping = np.asarray(mapping)
    n = labels.n
    if mapping.shape != (n,):
        raise ValueError(f"mapping must have shape ({n},)")
    inv = np.empty(n, dtype=np.intp)
    inv[mapping] = np.arange(n, dtype=np.intp)
    return LabelState(labels.codes[inv])


def load_csv(path) -> tuple[PooledSample, LabelState]:
    """Load a pooled two-sample CSV: d numeric columns plus a final `group` column.

    The header row is required and the group column must contain only 'A' and
    'B'.  Row order is preserved.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row") from None
        if len(header) < 2 or header[-1].strip() != "group":
            raise ValueError(f"{path}: last column must be named 'group'")
        rows: list[list[float]] = []
        letters: list[str] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
            try:
                rows.append([float(v) for v in row[:-1]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric observation: {exc}") from None
            letters.append(row[-1].strip())
    if not rows:
        raise ValueError(f"{path}: no data rows")
    labels = LabelState.from_letters(letters)
    sample = PooledSample(np.array(rows, dtype=float), labels.count_a, labels.count_b)
    return sample, labels
