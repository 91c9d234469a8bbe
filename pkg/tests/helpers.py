"""Random model builders and deliberately naive oracles shared by the tests."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from hypothesis import strategies as st

from hpam.measure import FiniteProbSpace, Skeleton


def labels(n, prefix="o"):
    return [f"{prefix}{i}" for i in range(n)]


def random_blocks(rng: random.Random, items):
    """Random partition via a random restricted growth string."""
    blocks: list[list] = []
    for x in items:
        k = rng.randrange(len(blocks) + 1)
        if k == len(blocks):
            blocks.append([x])
        else:
            blocks[k].append(x)
    return [frozenset(b) for b in blocks]


def random_masses(rng: random.Random, n, allow_zero=True):
    lo = 0 if allow_zero else 1
    while True:
        raw = [rng.randint(lo, 9) for _ in range(n)]
        if sum(raw):
            total = sum(raw)
            return [Fraction(r, total) for r in raw]


def random_space(rng: random.Random, n, id="S", prefix="o", singletons=False):
    outcomes = labels(n, prefix)
    atoms = [frozenset([x]) for x in outcomes] if singletons else random_blocks(rng, outcomes)
    return FiniteProbSpace(id, outcomes, atoms, random_masses(rng, len(atoms)))


def random_measurable_map(rng: random.Random, src: Skeleton, dst: Skeleton):
    """Each source atom lands inside one randomly chosen target atom."""
    table = {}
    for block in src.atoms:
        target = sorted(rng.choice(dst.atoms))
        for x in sorted(block):
            table[x] = rng.choice(target)
    return table


def random_target_skeleton(rng, m, id="T", prefix="t"):
    outcomes = labels(m, prefix)
    return Skeleton(id, outcomes, random_blocks(rng, outcomes))


def random_events(rng, outcomes, k):
    return [frozenset(x for x in outcomes if rng.random() < 0.5) for _ in range(k)]


# -- oracles ---------------------------------------------------------------

def naive_measure(space, event):
    """Measure of a measurable event by splitting atom mass over members.

    Independent of the library's block arithmetic: every outcome carries an
    equal share of its atom's mass, and the event's mass is the plain sum.
    """
    share = {}
    for block, m in zip(space.atoms, space.masses):
        for x in block:
            share[x] = m / len(block)
    return sum((share[x] for x in event), Fraction(0))


def naive_pushforward(src, table, dst):
    """Target atom masses computed outcome by outcome."""
    out = []
    for block in dst.atoms:
        total = Fraction(0)
        for x in src.outcomes:
            if table[x] in block:
                total += naive_measure(src, [x])
        out.append(total)
    return out


def powerset(items):
    items = list(items)
    for r in range(len(items) + 1):
        yield from (frozenset(c) for c in itertools.combinations(items, r))


def measurable_events(space):
    """All 2^k unions of atoms."""
    for combo in powerset(range(len(space.atoms))):
        yield frozenset().union(*(space.atoms[i] for i in combo))


def rgs_partitions(items):
    """All partitions via restricted growth strings; a second, independent enumerator."""
    items = list(items)
    n = len(items)
    if n == 0:
        yield ()
        return
    for code in itertools.product(range(n), repeat=n):
        if code[0] != 0:
            continue
        ok = all(code[i] <= max(code[:i]) + 1 for i in range(1, n))
        if not ok:
            continue
        blocks = {}
        for x, c in zip(items, code):
            blocks.setdefault(c, set()).add(x)
        yield tuple(frozenset(blocks[c]) for c in sorted(blocks))


def oracle_closure(outcomes, generators):
    """Coarsest partition admitting every generator, found by exhaustive search."""
    generators = [frozenset(g) for g in generators]
    admissible = [p for p in rgs_partitions(outcomes)
                  if all(b <= g or not (b & g) for g in generators for b in p)]
    fewest = min(len(p) for p in admissible)
    best = [p for p in admissible if len(p) == fewest]
    assert len(best) == 1
    return frozenset(best[0])


# -- hypothesis strategies -------------------------------------------------

@st.composite
def spaces(draw, min_size=1, max_size=6, id="S", prefix="o"):
    n = draw(st.integers(min_size, max_size))
    outcomes = labels(n, prefix)
    codes = [0]
    for _ in range(1, n):
        codes.append(draw(st.integers(0, max(codes) + 1)))
    blocks = {}
    for x, c in zip(outcomes, codes):
        blocks.setdefault(c, []).append(x)
    atoms = [frozenset(blocks[c]) for c in sorted(blocks)]
    raw = draw(st.lists(st.integers(0, 9), min_size=len(atoms), max_size=len(atoms)).filter(any))
    total = sum(raw)
    return FiniteProbSpace(id, outcomes, atoms, [Fraction(r, total) for r in raw])


@st.composite
def space_and_events(draw, max_size=6, max_events=3):
    space = draw(spaces(max_size=max_size))
    k = draw(st.integers(0, max_events))
    events = []
    for _ in range(k):
        picks = draw(st.lists(st.booleans(), min_size=len(space.atoms), max_size=len(space.atoms)))
        events.append(frozenset().union(*(a for a, p in zip(space.atoms, picks) if p)))
    return space, events


@st.composite
def space_and_map(draw, max_size=6, max_target=4):
    src = draw(spaces(max_size=max_size))
    m = draw(st.integers(1, max_target))
    outcomes = labels(m, "t")
    codes = [0]
    for _ in range(1, m):
        codes.append(draw(st.integers(0, max(codes) + 1)))
    blocks = {}
    for x, c in zip(outcomes, codes):
        blocks.setdefault(c, []).append(x)
    dst = Skeleton("T", outcomes, [frozenset(blocks[c]) for c in sorted(blocks)])
    table = {}
    for block in src.atoms:
        target = sorted(dst.atoms[draw(st.integers(0, len(dst.atoms) - 1))])
        for x in sorted(block):
            table[x] = target[draw(st.integers(0, len(target) - 1))]
    return src, dst, table
