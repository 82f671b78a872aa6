"""Exactly uniform sampling from the restricted permutation set.

The restricted set consists of all products of disjoint admissible
cross-swaps (including the identity).  Because the swap set splits into
vertex-disjoint complete-bipartite components, it is the direct product of
per-component matching sets, and distinct matchings are distinct
permutations.  Sampling therefore factorizes: per component, draw the
matching size k with probability proportional to the number of k-matchings
of K_{a,b}, then a uniform k-subset of each side and a uniform bijection
between them.  The result is exactly uniform, no MCMC or rejection involved.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .blockdesign import Component, SwapSet
from .core import LABEL_A, LABEL_B, LabelState, RestrictedPermutation
from .errors import EmptySwapSetError
from .rng import as_generator

SWAP_ONLY = "swap-only"
WITH_IDENTITY = "with-identity"


@dataclass(frozen=True)
class ComponentMatchingLaw:
    """Distribution of the matching size on a complete bipartite component.

    size_weights[k] is proportional to m_k = C(a, k) C(b, k) k!, the number of
    k-matchings of K_{a,b}, normalized to sum to one.
    """

    a: int
    b: int
    size_weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.size_weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "size_weights", w)

    @property
    def max_size(self) -> int:
        return int(self.size_weights.size - 1)


def component_matching_counts(a: int, b: int) -> ComponentMatchingLaw:
    """Matching-size law of K_{a,b} via the ratio recurrence.

    m_0 = 1 and m_{k+1}/m_k = (a-k)(b-k)/(k+1).  Computed in log space with a
    final normalization, so huge raw counts never overflow.
    """
    if a < 0 or b < 0:
        raise ValueError("component side sizes must be nonnegative")
    kmax = min(a, b)
    logw = np.empty(kmax + 1)
    logw[0] = 0.0
    for k in range(kmax):
        logw[k + 1] = logw[k] + math.log((a - k) * (b - k) / (k + 1))
    weights = np.exp(logw - logw.max())
    weights /= weights.sum()
    return ComponentMatchingLaw(a=a, b=b, size_weights=weights)


def _component_law(comp: Component) -> ComponentMatchingLaw:
    law = getattr(comp, "_law_cache", None)
    if law is None:
        law = component_matching_counts(comp.a_side.size, comp.b_side.size)
        object.__setattr__(comp, "_law_cache", law)
    return law


def sample_restricted(swapset: SwapSet, seed) -> RestrictedPermutation:
    """One draw, exactly uniform over all products of disjoint admissible swaps.

    The swap count automatically respects the floor(|R|/2) cap because the
    component sides partition the representatives.
    """
    rng = as_generator(seed)
    swaps: list[tuple[int, int]] = []
    for comp in swapset.components:
        law = _component_law(comp)
        k = int(rng.choice(law.max_size + 1, p=law.size_weights))
        if k == 0:
            continue
        a_pick = rng.choice(comp.a_side, size=k, replace=False)
        b_pick = rng.permutation(rng.choice(comp.b_side, size=k, replace=False))
        swaps.extend((int(i), int(j)) for i, j in zip(a_pick, b_pick))
    return RestrictedPermutation(frozenset(swaps))


def sample_restricted_batch(swapset: SwapSet, size: int, seed) -> list[RestrictedPermutation]:
    """`size` iid draws with the same law as :func:`sample_restricted`.

    Vectorizes the per-component subset draws: random sort keys give each
    draw a uniform permutation of both sides, whose length-k prefixes are a
    uniform k-subset in uniform order, so pairing prefixes position-by-
    position is a uniform bijection.
    """
    rng = as_generator(seed)
    per_draw: list[list[tuple[int, int]]] = [[] for _ in range(size)]
    for comp in swapset.components:
        law = _component_law(comp)
        ks = rng.choice(law.max_size + 1, size=size, p=law.size_weights)
        a_orders = np.argsort(rng.random((size, comp.a_side.size)), axis=1)
        b_orders = np.argsort(rng.random((size, comp.b_side.size)), axis=1)
        a_side, b_side = comp.a_side, comp.b_side
        for t in range(size):
            k = ks[t]
            if k:
                ai = a_side[a_orders[t, :k]]
                bj = b_side[b_orders[t, :k]]
                per_draw[t].extend((int(i), int(j)) for i, j in zip(ai, bj))
    return [RestrictedPermutation(frozenset(s)) for s in per_draw]


def sample_single_swap(swapset: SwapSet, seed, mode: str = WITH_IDENTITY) -> RestrictedPermutation:
    """Draw a single cross-swap.

    Modes:
        "swap-only": uniform over the admissible pairs; matches the one-swap
            law used by the variance identities.
        "with-identity": uniform over pairs plus the identity; a valid fixed
            reference set for the exact test.
    """
    if swapset.n_pairs == 0:
        raise EmptySwapSetError("no admissible swaps to draw from")
    rng = as_generator(seed)
    if mode == SWAP_ONLY:
        t = int(rng.integers(swapset.n_pairs))
    elif mode == WITH_IDENTITY:
        t = int(rng.integers(swapset.n_pairs + 1)) - 1
        if t < 0:
            return RestrictedPermutation.identity()
    else:
        raise ValueError(f"unknown single-swap mode {mode!r}")
    return RestrictedPermutation(frozenset({(int(swapset.pair_i[t]), int(swapset.pair_j[t]))}))


def sample_full_relabeling(n1: int, n2: int, seed) -> LabelState:
    """Uniform label vector with exactly n1 A's and n2 B's."""
    rng = as_generator(seed)
    codes = np.concatenate([
        np.full(n1, LABEL_A, dtype=np.uint8),
        np.full(n2, LABEL_B, dtype=np.uint8),
    ])
    return LabelState(rng.permutation(codes))


def restricted_set_size(swapset: SwapSet) -> int:
    """Exact |S_block| = prod over components of sum_k C(a,k) C(b,k) k!."""
    total = 1
    for comp in swapset.components:
        a, b = comp.a_side.size, comp.b_side.size
        total *= sum(
            math.comb(a, k) * math.comb(b, k) * math.factorial(k)
            for k in range(min(a, b) + 1)
        )
    return total


def enumerate_restricted(swapset: SwapSet, limit: int = 100_000) -> list[RestrictedPermutation]:
    """All elements of the restricted set, for instances small enough to list.

    Raises:
        ValueError: if the set has more than `limit` elements.
    """
    size = restricted_set_size(swapset)
    if size > limit:
        raise ValueError(f"restricted set has {size} elements, above limit {limit}")

    def component_matchings(comp: Component):
        a_side = [int(x) for x in comp.a_side]
        b_side = [int(x) for x in comp.b_side]
        out = []
        for k in range(min(len(a_side), len(b_side)) + 1):
            for a_sub in itertools.combinations(a_side, k):
                for b_tup in itertools.permutations(b_side, k):
                    out.append(tuple(zip(a_sub, b_tup)))
        return out

    per_comp = [component_matchings(c) for c in swapset.components]
    perms = []
    for combo in itertools.product(*per_comp):
        swaps = frozenset(pair for matching in combo for pair in matching)
        perms.append(RestrictedPermutation(swaps))
    return perms
