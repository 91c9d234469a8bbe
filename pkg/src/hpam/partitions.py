"""Set partitions: enumeration, Bell numbers and lattice helpers.

Partitions are tuples of frozensets. These routines are deliberately naive;
they back the brute-force oracles and are only used on small ground sets.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Sequence


def set_partitions(items: Sequence) -> Iterator[tuple[frozenset, ...]]:
    """Yield every partition of ``items`` exactly once.

    Blocks are emitted in order of their first element, so the output is
    deterministic for a given input order.
    """
    items = list(items)
    if not items:
        yield ()
        return

    def grow(i, blocks):
        if i == len(items):
            yield tuple(frozenset(b) for b in blocks)
            return
        x = items[i]
        for b in blocks:
            b.append(x)
            yield from grow(i + 1, blocks)
            b.pop()
        blocks.append([x])
        yield from grow(i + 1, blocks)
        blocks.pop()

    yield from grow(0, [])


def bell_number(n: int) -> int:
    """Number of partitions of an ``n``-element set (Bell triangle)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def is_union_of_blocks(event: Iterable, blocks: Iterable[frozenset]) -> bool:
    event = frozenset(event)
    return all(b <= event or not (b & event) for b in blocks)


def refines(fine: Iterable[frozenset], coarse: Iterable[frozenset]) -> bool:
    """True iff every block of ``fine`` sits inside some block of ``coarse``."""
    coarse = list(coarse)
    return all(any(b <= c for c in coarse) for b in fine)


def partition_key(blocks: Iterable[Iterable]) -> frozenset[frozenset]:
    """Order-free identity of a partition, for comparisons."""
    return frozenset(frozenset(b) for b in blocks)


def merge_blocks(blocks: Sequence[frozenset], i: int, j: int) -> tuple[frozenset, ...]:
    """Merge blocks ``i`` and ``j``; the union takes the position of the lower index."""
    if i == j:
        raise ValueError("cannot merge a block with itself")
    lo, hi = min(i, j), max(i, j)
    out = list(blocks)
    out[lo] = blocks[lo] | blocks[hi]
    del out[hi]
    return tuple(out)
