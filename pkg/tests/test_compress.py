import math
import random

import pytest

from keyforge import ffs
from keyforge.errors import InvalidTagError
from keyforge.tagtree import calendar_layout, uniform_layout

from .oracles import antichain_enumeration_oracle, leaf_cover, minimal_cover_oracle


def test_full_sibling_set_collapses_to_parent():
    space = uniform_layout(27, 3)
    parent = (2, 3)
    children = [parent + (c,) for c in range(1, 4)]
    assert ffs.compress(space, children) == [parent]


def test_singleton_leaf_stays():
    space = uniform_layout(27, 3)
    leaf = (1, 2, 3)
    assert ffs.compress(space, [leaf]) == [leaf]


def test_first_four_leaves_of_nine():
    space = uniform_layout(9, 2)
    tags = space.lex_range(0, 3)
    assert ffs.compress(space, tags) == [(1,), (2, 1)]
    # ground truth by full antichain enumeration on this 13-node tree
    assert antichain_enumeration_oracle(space, tags) == [(1,), (2, 1)]


def test_internal_tags_mean_whole_subtrees():
    space = uniform_layout(27, 3)
    # (1) plus all of (2,*) as internal nodes plus all leaves of (3)
    tags = [(1,)] + [(2, c) for c in range(1, 4)]
    tags += [(3, a, b) for a in range(1, 4) for b in range(1, 4)]
    assert ffs.compress(space, tags) == [(1,), (2,), (3,)]


def test_redundant_descendants_dropped():
    space = uniform_layout(27, 3)
    tags = [(1,), (1, 2), (1, 2, 3), (2, 1)]
    assert ffs.compress(space, tags) == [(1,), (2, 1)]


def test_empty_input():
    space = uniform_layout(27, 3)
    assert ffs.compress(space, []) == []


def test_invalid_tags_rejected():
    space = uniform_layout(27, 3)
    with pytest.raises(InvalidTagError):
        ffs.compress(space, [(4, 1)])
    with pytest.raises(InvalidTagError):
        ffs.compress(space, [()])
    policy_space = uniform_layout(9, 2, policy_levels=("s",))
    with pytest.raises(InvalidTagError):
        ffs.compress(policy_space, [(1, 1, "high")])


def test_full_space_compresses_to_level_one():
    # never the root: releasing the master key is not a tag release
    space = uniform_layout(9, 2)
    assert ffs.compress(space, space.lex_range(0, 8)) == [(1,), (2,), (3,)]


def _spaces_under(leaf_limit):
    """Exhaustive (B, L) grid of uniform spaces with <= leaf_limit leaves."""
    spaces = []
    for depth in range(1, 8):
        b = 2
        while b ** depth <= leaf_limit:
            spaces.append(uniform_layout(b ** depth, depth))
            b += 1
        if depth == 1:
            # depth-1 spaces with B=2..limit are all structurally alike; keep a few
            spaces = [s for s in spaces if s.time_levels > 1 or s.branching in (2, 7, 50)]
    return spaces


def test_oracle_equivalence_random_subsets():
    """compress == top-down minimal-cover oracle, and covers match exactly."""
    rng = random.Random(42)
    for space in _spaces_under(64):
        n = space.leaf_count()
        for _ in range(60):
            k = rng.randint(0, n)
            tags = [space.tag_of_index(i) for i in rng.sample(range(n), k)]
            got = ffs.compress(space, tags)
            expected = minimal_cover_oracle(space, tags)
            assert got == expected, (space.branching, space.time_levels, tags)
            assert leaf_cover(space, got) == leaf_cover(space, tags)


def test_oracle_equivalence_with_internal_tags():
    rng = random.Random(43)
    space = uniform_layout(27, 3)
    nodes = ([(a,) for a in range(1, 4)]
             + [(a, b) for a in range(1, 4) for b in range(1, 4)]
             + [space.tag_of_index(i) for i in range(27)])
    for _ in range(200):
        tags = rng.sample(nodes, rng.randint(0, 12))
        got = ffs.compress(space, tags)
        assert got == minimal_cover_oracle(space, tags)
        assert leaf_cover(space, got) == leaf_cover(space, tags)
        # output is an antichain
        as_set = set(got)
        for node in got:
            assert not any(node[:k] in as_set for k in range(1, len(node)))


def test_oracle_equivalence_calendar():
    space = calendar_layout(2021, years=1, chunks_per_day=2)  # 730 leaves
    rng = random.Random(44)
    for _ in range(50):
        k = rng.randint(1, 80)
        tags = [space.tag_of_index(i) for i in rng.sample(range(space.leaf_count()), k)]
        got = ffs.compress(space, tags)
        assert leaf_cover(space, got) == leaf_cover(space, tags)
        assert got == minimal_cover_oracle(space, tags)
    # a whole (non-leap) February collapses to the month node
    feb = [(1, 2, d, c) for d in range(1, 29) for c in (1, 2)]
    assert ffs.compress(space, feb) == [(1, 2)]


def test_range_cover_matches_compress_exhaustive_small():
    for space in (uniform_layout(16, 4), uniform_layout(27, 3), uniform_layout(8, 1),
                  calendar_layout(2021, years=1, chunks_per_day=1)):
        n = space.leaf_count()
        for lo in range(0, n, max(1, n // 20)):
            for hi in range(lo, n, max(1, n // 20)):
                want = ffs.compress(space, space.lex_range(lo, hi))
                assert ffs.range_cover(space, lo, hi) == want
                assert ffs.range_cover_size(space, lo, hi) == len(want)


def test_range_cover_matches_compress_random_medium():
    space = uniform_layout(70080, 7)
    rng = random.Random(45)
    for _ in range(40):
        lo = rng.randrange(space.leaf_count())
        hi = min(space.leaf_count() - 1, lo + rng.randrange(3000))
        want = ffs.compress(space, space.lex_range(lo, hi))
        got = ffs.range_cover(space, lo, hi)
        assert got == want
        assert ffs.range_cover_size(space, lo, hi) == len(want)


def test_range_cover_bounds_checked():
    space = uniform_layout(9, 2)
    with pytest.raises(InvalidTagError):
        ffs.range_cover(space, 0, 9)
    with pytest.raises(InvalidTagError):
        ffs.range_cover(space, -1, 2)
    with pytest.raises(InvalidTagError):
        ffs.range_cover_size(space, 5, 4)


def test_prefix_cover_size_is_digit_sum():
    """For uniform spaces, |cover(leaves 0..j-1)| is the base-B digit sum of j."""
    space = uniform_layout(70080, 7)
    b = space.branching
    for j in (1, 5, 24, 625, 3126, 70080, 78124):
        digits = []
        x = j
        while x:
            x, r = divmod(x, b)
            digits.append(r)
        assert ffs.range_cover_size(space, 0, j - 1) == sum(digits)


def test_succinctness_bound_small_space():
    """Contiguous ranges stay within 2*B*log_B; prefix ranges within B*log_B.

    Exhaustive at the evaluation branching factor (B=5).  Sizes start at 2:
    log of 1 is 0, so singletons are outside any multiplicative log bound
    (and at very small B the constant is too tight anyway, e.g. B=3, j=2).
    """
    space = uniform_layout(625, 4)
    b = space.branching
    n = space.leaf_count()
    for lo in range(n):
        for hi in range(lo + 1, n):
            size = ffs.range_cover_size(space, lo, hi)
            bound = 2 * b * math.log(hi - lo + 1, b)
            assert size <= bound
    for j in range(2, n + 1):
        assert ffs.range_cover_size(space, 0, j - 1) <= b * math.log(j, b)
