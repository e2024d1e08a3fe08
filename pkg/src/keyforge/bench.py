"""``kf-bench``: microbenchmarks and size accounting, CSV on stdout.

``sign`` / ``verify`` time the core operations per tree depth, both cold
(every derivation from the master key, no caches) and cached (derivation
and certificate caches warm), since production servers sign and verify
long runs of tags sharing chain prefixes.

``expiry-sizes`` tabulates, per depth, the worst-case and average size of a
cumulative expiry publication over the whole life of the space, counting
entries and bytes in the 64-byte-per-key accounting model.
"""

from __future__ import annotations

import argparse
import random
import sys
import time

from . import ffs, tagtree
from .hibs import CertCache

CHUNKS_PER_YEAR = 365 * 96
CHUNKS_PER_2_YEARS = 730 * 96


def _bench_op(fn, iters: int) -> float:
    t0 = time.perf_counter()
    for _ in range(iters):
        fn()
    return (time.perf_counter() - t0) / iters


def _rand_tags(space: tagtree.TagSpace, count: int, rng: random.Random):
    return [space.tag_of_index(rng.randrange(space.leaf_count())) for _ in range(count)]


def bench_sign_verify(op: str, depths: list[int], iters: int, leaf_target: int,
                      seed: int) -> None:
    rng = random.Random(seed)
    print("op,depth,mode,iters,avg_ms,ops_per_sec")
    for depth in depths:
        space = tagtree.uniform_layout(leaf_target, depth)
        keypair = ffs.ffs_keygen(seed.to_bytes(32, "big"), max_depth=depth)
        tags = _rand_tags(space, iters, rng)
        idents = [tagtree.tag_to_identity(t) for t in tags]
        digests = [rng.randbytes(32) for _ in range(iters)]

        if op == "sign":
            state = {"i": 0}

            def cold():
                i = state["i"] = (state["i"] + 1) % iters
                ffs.ffs_sign(keypair.sk, idents[i], digests[i])

            cache = ffs.KeyCache(8192)

            def cached():
                i = state["i"] = (state["i"] + 1) % iters
                ffs.ffs_sign(keypair.sk, idents[i], digests[i], cache)

            for mode, fn in (("cold", cold), ("cached", cached)):
                avg = _bench_op(fn, iters)
                print(f"sign,{depth},{mode},{iters},{avg * 1e3:.3f},{1.0 / avg:.1f}")
        else:
            cache = ffs.KeyCache(8192)
            signatures = [ffs.ffs_sign(keypair.sk, idents[i], digests[i], cache)
                          for i in range(iters)]
            state = {"i": 0}

            def cold():
                i = state["i"] = (state["i"] + 1) % iters
                assert ffs.ffs_verify(keypair.vk, idents[i], digests[i], signatures[i])

            cert_cache = CertCache()

            def cached():
                i = state["i"] = (state["i"] + 1) % iters
                assert ffs.ffs_verify(keypair.vk, idents[i], digests[i], signatures[i],
                                      cert_cache)

            for mode, fn in (("cold", cold), ("cached", cached)):
                avg = _bench_op(fn, iters)
                print(f"verify,{depth},{mode},{iters},{avg * 1e3:.3f},{1.0 / avg:.1f}")


def expiry_size_table(leaf_target: int, depth: int) -> tuple[int, int, int, float]:
    """(branching, structural leaves, worst-case entries, mean entries) for
    cumulative prefix releases over the life of a uniform space."""
    space = tagtree.uniform_layout(leaf_target, depth)
    n = space.leaf_count()
    worst = 0
    total = 0
    for j in range(1, n + 1):
        size = ffs.range_cover_size(space, 0, j - 1)
        worst = max(worst, size)
        total += size
    return space.branching, n, worst, total / n


def bench_expiry_sizes(depths: list[int]) -> None:
    print("span,depth,branching,structural_leaves,max_entries,max_bytes,"
          "avg_entries,avg_bytes")
    for label, leaves in (("1y", CHUNKS_PER_YEAR), ("2y", CHUNKS_PER_2_YEARS)):
        for depth in depths:
            b, n, worst, avg = expiry_size_table(leaves, depth)
            print(f"{label},{depth},{b},{n},{worst},{worst * ffs.MODEL_KEY_BYTES},"
                  f"{avg:.1f},{avg * ffs.MODEL_KEY_BYTES:.0f}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="kf-bench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("sign", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--depths", default="1,2,3,4,5,6,7")
        p.add_argument("--iters", type=int, default=100)
        p.add_argument("--leaf-target", type=int, default=CHUNKS_PER_2_YEARS)
        p.add_argument("--seed", type=int, default=7)
    p_sizes = sub.add_parser("expiry-sizes")
    p_sizes.add_argument("--depths", default="1,2,3,4,5,6,7")
    args = parser.parse_args(argv)

    depths = [int(d) for d in args.depths.split(",") if d]
    if args.command == "expiry-sizes":
        bench_expiry_sizes(depths)
    else:
        bench_sign_verify(args.command, depths, args.iters, args.leaf_target, args.seed)
    return 0


if __name__ == "__main__":
    sys.exit(main())
