"""Exception hierarchy.

Every error raised on purpose by the library derives from :class:`HpamError`,
so callers can catch the whole family in one place. Errors carry the exact
witnesses (atoms, rationals, vertex sequences) as attributes.
"""

from __future__ import annotations


class HpamError(ValueError):
    """Base class for all library errors."""


# -- measure-core ----------------------------------------------------------

class InvalidRational(HpamError):
    pass


class DuplicateOutcome(HpamError):
    def __init__(self, label):
        super().__init__(f"duplicate outcome label {label!r}")
        self.label = label


class NotAPartition(HpamError):
    pass


class NegativeMass(HpamError):
    def __init__(self, atom, mass):
        super().__init__(f"atom {_fmt_block(atom)} has negative mass {mass}")
        self.atom = atom
        self.mass = mass


class MassNotOne(HpamError):
    def __init__(self, total):
        self.total = total
        self.deficit = 1 - total
        super().__init__(f"masses sum to {total}, deficit {self.deficit}")


class UnknownOutcome(HpamError):
    def __init__(self, label, space_id=None):
        where = f" in space {space_id!r}" if space_id is not None else ""
        super().__init__(f"unknown outcome {label!r}{where}")
        self.label = label
        self.space_id = space_id


class NotTotal(HpamError):
    def __init__(self, missing, space_id=None):
        self.missing = tuple(missing)
        where = f" of {space_id!r}" if space_id is not None else ""
        super().__init__(f"map is undefined on outcomes{where}: {list(self.missing)}")


class NotMeasurable(HpamError):
    """An event (or a map preimage) is not a union of atom blocks.

    ``atom`` is the block that the offending set straddles; ``index`` is the
    branch or leg position when raised from a family builder.
    """

    def __init__(self, event, atom, index=None, message=None):
        self.event = frozenset(event)
        self.atom = frozenset(atom)
        self.index = index
        if message is None:
            message = f"{_fmt_block(self.event)} straddles atom {_fmt_block(self.atom)}"
            if index is not None:
                message = f"index {index}: {message}"
        super().__init__(message)


class MismatchedInput(HpamError):
    pass


# -- abstraction-ops -------------------------------------------------------

class NotBijective(HpamError):
    pass


class WeightsNotNormalized(HpamError):
    def __init__(self, total):
        self.total = total
        self.deficit = 1 - total
        super().__init__(f"weights sum to {total}, deficit {self.deficit}")


class InvalidWeights(HpamError):
    pass


# -- hpam-dag --------------------------------------------------------------

class DuplicateVertex(HpamError):
    def __init__(self, vertex_id):
        super().__init__(f"vertex {vertex_id!r} already present")
        self.vertex_id = vertex_id


class UnknownVertex(HpamError):
    def __init__(self, vertex_id):
        super().__init__(f"no vertex {vertex_id!r}")
        self.vertex_id = vertex_id


class DuplicateEdge(HpamError):
    def __init__(self, src, dst):
        super().__init__(f"edge {src!r} -> {dst!r} already present")
        self.src = src
        self.dst = dst


class NoSuchEdge(HpamError):
    def __init__(self, src, dst):
        super().__init__(f"no edge {src!r} -> {dst!r}")
        self.src = src
        self.dst = dst


class NoPath(HpamError):
    def __init__(self, src, dst):
        super().__init__(f"no path from {src!r} to {dst!r}")
        self.src = src
        self.dst = dst


class CycleIntroduced(HpamError):
    def __init__(self, cycle):
        self.cycle = tuple(cycle)
        super().__init__("cycle " + " -> ".join(self.cycle))


class Eq1Violation(HpamError):
    """Measure preservation failed on an edge.

    ``expected`` is the target vertex's mass of ``atom``; ``actual`` is the
    source vertex's mass of the preimage. ``stage`` is filled in by the
    pipeline when the violation happens while admitting a stage.
    """

    def __init__(self, src, dst, atom, expected, actual, stage=None):
        self.src = src
        self.dst = dst
        self.atom = frozenset(atom)
        self.expected = expected
        self.actual = actual
        self.stage = stage
        super().__init__(self._message())

    def _message(self):
        prefix = f"stage {self.stage}: " if self.stage is not None else ""
        return (f"{prefix}edge {self.src!r} -> {self.dst!r}: atom {_fmt_block(self.atom)} "
                f"has mass {self.expected} but its preimage has mass {self.actual}")

    def at_stage(self, stage):
        self.stage = stage
        self.args = (self._message(),)
        return self


# -- hpoa ------------------------------------------------------------------

class EmptyEssentials(HpamError):
    pass


class TooLarge(HpamError):
    pass


class NoCoarsestUnique(HpamError):
    pass


# -- pipeline --------------------------------------------------------------

class StageTypeMismatch(HpamError):
    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"stage {stage}: {message}")


class HpoaImpossible(HpamError):
    pass


class EventSetMismatch(HpamError):
    pass


# -- cli-io ----------------------------------------------------------------

class ModelError(HpamError):
    """A model document could not be loaded; ``line``/``column`` are 1-based."""

    kind = "error"

    def __init__(self, message, line=None, column=None, cause=None):
        self.line = line
        self.column = column
        self.cause = cause
        self.detail = message
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(f"{self.kind}: {where}{message}")


class ModelSyntaxError(ModelError):
    kind = "syntax error"


class ModelSemanticError(ModelError):
    kind = "semantic error"


def _fmt_block(block):
    return "{" + ",".join(sorted(map(str, block))) + "}"


__all__ = [name for name, obj in list(globals().items())
           if isinstance(obj, type) and issubclass(obj, HpamError)]
