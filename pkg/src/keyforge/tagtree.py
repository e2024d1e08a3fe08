"""Time-chunk tag spaces.

A tag space carves a key-rotation span (two years by default) into short
leaf chunks (15 minutes by default) arranged as a tree: every timestamp in
the span lands in exactly one leaf, and internal nodes stand for the whole
block of time beneath them.  Tags are tuples of small integers, one per
level; a leaf tag pins down one chunk, a prefix pins down a day, a month, a
whole year.

Two layouts are provided:

* ``calendar`` -- the intuitive year/month/day/chunk shape.  Month lengths
  follow the real calendar; impossible dates are simply unused nodes, and
  all counting is over valid leaves only.
* ``uniform`` -- ``L`` levels of equal branching factor ``B``, which packs a
  given leaf budget with far better expiry compression than the calendar
  shape.

Tags may carry extra policy components beyond the time levels (for example
a sensitivity class).  Time containment checks look only at the time
levels, so senders can add policy levels without breaking verification
anywhere else.
"""

from __future__ import annotations

import calendar as _cal
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .errors import InvalidTagError, SpanError

Tag = tuple  # components: int for time levels, str for policy levels

SECONDS_PER_DAY = 86400
DEFAULT_CHUNK_SECONDS = 900
DEFAULT_CHUNKS_PER_DAY = SECONDS_PER_DAY // DEFAULT_CHUNK_SECONDS  # 96


def _utc(ts: int) -> datetime:
    return datetime.fromtimestamp(ts, tz=timezone.utc)


@dataclass(frozen=True)
class LevelSpec:
    name: str
    cardinality: int


@dataclass(frozen=True)
class TagSpace:
    """Immutable description of one tag tree.

    ``layout`` is "uniform" or "calendar".  For uniform spaces every level
    has ``branching`` children; for calendar spaces the day level varies
    with the real month length and ``levels`` records the maxima.
    """

    layout: str
    epoch_start: int
    chunk_duration: int
    levels: tuple[LevelSpec, ...]
    branching: int = 0                      # uniform only
    chunks_per_day: int = DEFAULT_CHUNKS_PER_DAY  # calendar only
    policy_levels: tuple[str, ...] = ()
    _year_month_days: tuple[tuple[int, ...], ...] = field(default=(), repr=False)
    _year_leaf_offsets: tuple[int, ...] = field(default=(), repr=False)

    # -- construction ------------------------------------------------------

    @property
    def time_levels(self) -> int:
        return len(self.levels)

    @property
    def depth(self) -> int:
        return len(self.levels)

    def leaf_count(self) -> int:
        if self.layout == "uniform":
            return self.branching ** self.time_levels
        return self._year_leaf_offsets[-1]

    def span(self) -> tuple[int, int]:
        """Half-open [start, end) of the whole space."""
        if self.layout == "uniform":
            return self.epoch_start, self.epoch_start + self.leaf_count() * self.chunk_duration
        days = sum(sum(m) for m in self._year_month_days) // self.chunks_per_day
        return self.epoch_start, self.epoch_start + days * SECONDS_PER_DAY

    # -- structural queries --------------------------------------------------

    def _check_time_prefix(self, tag: Tag) -> tuple[int, ...]:
        time_part = tag[: self.time_levels]
        if len(tag) > self.time_levels:
            for extra in tag[self.time_levels:]:
                if not isinstance(extra, str) or not extra or "/" in extra:
                    raise InvalidTagError(f"bad policy component {extra!r}")
        if not time_part:
            raise InvalidTagError("empty tag")
        prefix: tuple[int, ...] = ()
        for comp in time_part:
            if not isinstance(comp, int):
                raise InvalidTagError(f"time component {comp!r} is not an integer")
            if not 1 <= comp <= self.child_count(prefix):
                raise InvalidTagError(f"component {comp} out of range at {prefix}")
            prefix = prefix + (comp,)
        return prefix

    def validate_tag(self, tag: Tag) -> tuple[int, ...]:
        """Return the time prefix of ``tag``; raise InvalidTagError if bad."""
        return self._check_time_prefix(tag)

    def is_leaf(self, tag: Tag) -> bool:
        return len(self.validate_tag(tag)) == self.time_levels

    def child_count(self, prefix: tuple[int, ...]) -> int:
        level = len(prefix)
        if level >= self.time_levels:
            raise InvalidTagError("leaf tags have no children")
        if self.layout == "uniform":
            return self.branching
        if level == 2:  # children of (year, month) are the real days
            return self._year_month_days[prefix[0] - 1][prefix[1] - 1] // self.chunks_per_day
        return self.levels[level].cardinality

    def subtree_leaf_count(self, prefix: tuple[int, ...]) -> int:
        level = len(prefix)
        if self.layout == "uniform":
            return self.branching ** (self.time_levels - level)
        if level == 0:
            return self.leaf_count()
        y = prefix[0]
        if level == 1:
            return self._year_leaf_offsets[y] - self._year_leaf_offsets[y - 1]
        if level == 2:
            return self._year_month_days[y - 1][prefix[1] - 1]
        if level == 3:
            return self.chunks_per_day
        return 1

    # -- leaf index <-> tag -------------------------------------------------

    def index_of_tag(self, tag: Tag) -> int:
        prefix = self.validate_tag(tag)
        if len(prefix) != self.time_levels:
            raise InvalidTagError("not a leaf tag")
        if self.layout == "uniform":
            idx = 0
            for comp in prefix:
                idx = idx * self.branching + (comp - 1)
            return idx
        y, m, d, c = prefix
        months = self._year_month_days[y - 1]
        idx = self._year_leaf_offsets[y - 1]
        idx += sum(months[: m - 1])
        idx += (d - 1) * self.chunks_per_day
        return idx + (c - 1)

    def tag_of_index(self, index: int) -> Tag:
        if not 0 <= index < self.leaf_count():
            raise InvalidTagError(f"leaf index {index} out of range")
        if self.layout == "uniform":
            comps = []
            for _ in range(self.time_levels):
                index, rem = divmod(index, self.branching)
                comps.append(rem + 1)
            return tuple(reversed(comps))
        y = 1
        while self._year_leaf_offsets[y] <= index:
            y += 1
        rem = index - self._year_leaf_offsets[y - 1]
        months = self._year_month_days[y - 1]
        m = 1
        while rem >= months[m - 1]:
            rem -= months[m - 1]
            m += 1
        d, c = divmod(rem, self.chunks_per_day)
        return (y, m, d + 1, c + 1)

    def lex_range(self, from_leaf: int, to_leaf: int) -> list[Tag]:
        """Leaf tags with indices from_leaf..to_leaf inclusive (0-based)."""
        if not 0 <= from_leaf <= to_leaf < self.leaf_count():
            raise InvalidTagError(
                f"range {from_leaf}..{to_leaf} outside 0..{self.leaf_count() - 1}"
            )
        return [self.tag_of_index(i) for i in range(from_leaf, to_leaf + 1)]

    # -- time <-> tag --------------------------------------------------------

    def tag_of_time(self, ts: int) -> Tag:
        """The unique leaf whose chunk contains ``ts``."""
        start, end = self.span()
        ts = int(ts)
        if not start <= ts < end:
            raise SpanError(f"timestamp {ts} outside span [{start}, {end})")
        if self.layout == "uniform":
            return self.tag_of_index((ts - start) // self.chunk_duration)
        day_index, sec = divmod(ts - start, SECONDS_PER_DAY)
        # Consistent with the floor-division chunk boundaries in prefix_bounds
        # even when chunks_per_day does not divide the day evenly.
        cpd = self.chunks_per_day
        chunk = min(cpd - 1, ((sec + 1) * cpd - 1) // SECONDS_PER_DAY)
        dt = _utc(self.epoch_start + day_index * SECONDS_PER_DAY)
        y = dt.year - _utc(self.epoch_start).year + 1
        return (y, dt.month, dt.day, chunk + 1)

    def _day_start(self, y: int, m: int, d: int) -> int:
        base = _utc(self.epoch_start)
        dt = datetime(base.year + y - 1, m, d, tzinfo=timezone.utc)
        return int(dt.timestamp())

    def prefix_bounds(self, tag: Tag) -> tuple[int, int]:
        """Half-open [start, end) window covered by a tag's time prefix."""
        prefix = self.validate_tag(tag)
        if self.layout == "uniform":
            level = len(prefix)
            first = 0
            for comp in prefix:
                first = first * self.branching + (comp - 1)
            width = self.branching ** (self.time_levels - level)
            first *= width
            start = self.epoch_start + first * self.chunk_duration
            return start, start + width * self.chunk_duration
        y = prefix[0]
        if len(prefix) == 1:
            start = self._day_start(y, 1, 1)
            end = (self._day_start(y + 1, 1, 1)
                   if y < self.levels[0].cardinality else self.span()[1])
            return start, end
        m = prefix[1]
        if len(prefix) == 2:
            start = self._day_start(y, m, 1)
            days = self._year_month_days[y - 1][m - 1] // self.chunks_per_day
            return start, start + days * SECONDS_PER_DAY
        d = prefix[2]
        day0 = self._day_start(y, m, d)
        if len(prefix) == 3:
            return day0, day0 + SECONDS_PER_DAY
        c = prefix[3]
        cpd = self.chunks_per_day
        return (day0 + (c - 1) * SECONDS_PER_DAY // cpd,
                day0 + c * SECONDS_PER_DAY // cpd)

    def contains(self, tag: Tag, ts: int) -> bool:
        """t is inside the block of time the tag's time prefix stands for."""
        try:
            start, end = self.prefix_bounds(tag)
        except (InvalidTagError, SpanError):
            return False
        return start <= int(ts) < end

    def live_until(self, tag: Tag) -> int:
        """First instant at which the tag counts as expired."""
        return self.prefix_bounds(tag)[1]


def uniform_layout(
    leaf_target: int,
    depth: int,
    epoch_start: int = 0,
    chunk_duration: int = DEFAULT_CHUNK_SECONDS,
    policy_levels: tuple[str, ...] = (),
) -> TagSpace:
    """Equal-branching space: the smallest B with B**depth >= leaf_target."""
    if depth < 1:
        raise InvalidTagError("depth must be >= 1")
    if leaf_target < 1:
        raise InvalidTagError("leaf_target must be >= 1")
    b = 1
    while b ** depth < leaf_target:
        b += 1
    levels = tuple(LevelSpec(f"level{j + 1}", b) for j in range(depth))
    return TagSpace(
        layout="uniform",
        epoch_start=int(epoch_start),
        chunk_duration=int(chunk_duration),
        levels=levels,
        branching=b,
        policy_levels=policy_levels,
    )


def calendar_layout(
    start_year: int,
    years: int = 2,
    chunks_per_day: int = DEFAULT_CHUNKS_PER_DAY,
    policy_levels: tuple[str, ...] = (),
) -> TagSpace:
    """Year/month/day/chunk space over whole calendar years, UTC."""
    if years < 1:
        raise InvalidTagError("years must be >= 1")
    if not 1 <= chunks_per_day <= SECONDS_PER_DAY:
        raise InvalidTagError("chunks_per_day out of range")
    epoch_start = int(datetime(start_year, 1, 1, tzinfo=timezone.utc).timestamp())
    month_days = []
    offsets = [0]
    for y in range(start_year, start_year + years):
        months = tuple(_cal.monthrange(y, m)[1] * chunks_per_day for m in range(1, 13))
        month_days.append(months)
        offsets.append(offsets[-1] + sum(months))
    levels = (
        LevelSpec("year", years),
        LevelSpec("month", 12),
        LevelSpec("day", 31),
        LevelSpec("chunk", chunks_per_day),
    )
    return TagSpace(
        layout="calendar",
        epoch_start=epoch_start,
        chunk_duration=SECONDS_PER_DAY // chunks_per_day,
        levels=levels,
        chunks_per_day=chunks_per_day,
        policy_levels=policy_levels,
        _year_month_days=tuple(month_days),
        _year_leaf_offsets=tuple(offsets),
    )


# -- tag text and identity bridging ----------------------------------------


def tag_text(tag: Tag) -> str:
    """Canonical rendering, e.g. "2/12/30/96" (used in mail headers)."""
    return "/".join(str(c) for c in tag)


def parse_tag_text(text: str, space: TagSpace) -> Tag:
    if not text:
        raise InvalidTagError("empty tag text")
    parts = text.split("/")
    comps: list[int | str] = []
    for i, part in enumerate(parts):
        if i < space.time_levels:
            if not part.isdigit():
                raise InvalidTagError(f"time component {part!r} is not a number")
            comps.append(int(part))
        else:
            comps.append(part)
    tag = tuple(comps)
    space.validate_tag(tag)
    return tag


def tag_to_identity(tag: Tag) -> tuple[bytes, ...]:
    """Identity tuple for the signature layer: decimal/utf-8 components."""
    return tuple(str(c).encode("utf-8") for c in tag)


def identity_to_tag(identity: tuple[bytes, ...], space: TagSpace) -> Tag:
    comps: list[int | str] = []
    for i, comp in enumerate(identity):
        text = comp.decode("utf-8", errors="strict")
        comps.append(int(text) if i < space.time_levels else text)
    tag = tuple(comps)
    space.validate_tag(tag)
    return tag
