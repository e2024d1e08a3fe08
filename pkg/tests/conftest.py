import json
import os

import pytest

from keyforge import ffs, protocol, tagtree

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


@pytest.fixture(scope="session")
def golden():
    with open(os.path.join(DATA_DIR, "golden.json")) as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def small_space():
    """Depth-4 space, 900s chunks, epoch at a fixed instant."""
    return tagtree.uniform_layout(4096, 4, epoch_start=1_700_000_000, chunk_duration=900)


@pytest.fixture(scope="session")
def keypair():
    return ffs.ffs_keygen(b"\x11" * 32, max_depth=8)


class StepClock:
    """Mutable test clock."""

    def __init__(self, now: int):
        self.now = int(now)

    def __call__(self) -> int:
        return self.now

    def set(self, now: int) -> None:
        self.now = int(now)

    def advance(self, seconds: int) -> None:
        self.now += int(seconds)


@pytest.fixture()
def clock(small_space):
    # mid-span so tag_of_time(now +/- delta_hat) always lands inside
    start, end = small_space.span()
    return StepClock((start + end) // 2)


@pytest.fixture()
def cfg(small_space, clock):
    return protocol.KeyForgeConfig(space=small_space, domain="sender.example", clock=clock)
