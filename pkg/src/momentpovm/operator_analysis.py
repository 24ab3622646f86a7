"""Deficiency indices of the momentum operator ``-i d/dx`` on intervals.

The deficiency spaces ``ker(A^dagger -+ i)`` are spanned by ``exp(-+x)``
whenever those functions are square integrable on the interval, so the
indices follow from which ends of the interval are infinite.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .star_algebra import TruncatedRep

ESSENTIALLY_SELFADJOINT = "essentially_selfadjoint"
MAXIMALLY_SYMMETRIC = "maximally_symmetric_not_sa"
MANY_EXTENSIONS = "many_selfadjoint_extensions"
NO_EXTENSION = "no_selfadjoint_extension_not_maximal"

_NOTES = {
    ESSENTIALLY_SELFADJOINT: "unique selfadjoint extension (the closure)",
    MAXIMALLY_SYMMETRIC: "one deficiency index vanishes: no proper symmetric extension, no selfadjoint extension",
    MANY_EXTENSIONS: "equal nonzero indices n: selfadjoint extensions form a U(n) family of real dimension n^2",
    NO_EXTENSION: "unequal nonzero indices: no selfadjoint extension, proper symmetric extensions exist",
}


@dataclass(frozen=True)
class IntervalDomain:
    kind: str
    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        if self.kind == "bounded":
            if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
                raise InvalidInputError("bounded interval needs finite lo < hi")
        elif self.kind == "half_line_right":
            if not math.isfinite(self.lo):
                raise InvalidInputError("right half-line needs a finite left end")
            object.__setattr__(self, "hi", math.inf)
        elif self.kind == "half_line_left":
            if not math.isfinite(self.hi):
                raise InvalidInputError("left half-line needs a finite right end")
            object.__setattr__(self, "lo", -math.inf)
        elif self.kind == "full_line":
            object.__setattr__(self, "lo", -math.inf)
            object.__setattr__(self, "hi", math.inf)
        else:
            raise InvalidInputError(f"unknown interval kind {self.kind!r}")

    @classmethod
    def bounded(cls, lo: float, hi: float) -> "IntervalDomain":
        return cls("bounded", lo, hi)

    @classmethod
    def half_line_right(cls, lo: float = 0.0) -> "IntervalDomain":
        return cls("half_line_right", lo)

    @classmethod
    def half_line_left(cls, hi: float = 0.0) -> "IntervalDomain":
        return cls("half_line_left", hi=hi)

    @classmethod
    def full_line(cls) -> "IntervalDomain":
        return cls("full_line")

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if math.isfinite(self.lo):
            out["lo"] = self.lo
        if math.isfinite(self.hi):
            out["hi"] = self.hi
        return out


@dataclass(frozen=True)
class DeficiencyReport:
    n_plus: int
    n_minus: int
    classification: str
    extension_family_dim: int
    note: str = ""

    def to_json(self) -> dict:
        return {
            "n_plus": self.n_plus,
            "n_minus": self.n_minus,
            "classification": self.classification,
            "extension_family_dim": self.extension_family_dim,
            "note": self.note,
        }


def classify_extension(n_plus: int, n_minus: int) -> tuple[str, int]:
    """Classification tag and real dimension of the selfadjoint extension family."""
    if n_plus < 0 or n_minus < 0:
        raise InvalidInputError("deficiency indices are nonnegative")
    if n_plus == n_minus == 0:
        return ESSENTIALLY_SELFADJOINT, 0
    if n_plus == 0 or n_minus == 0:
        return MAXIMALLY_SYMMETRIC, 0
    if n_plus == n_minus:
        return MANY_EXTENSIONS, n_plus**2
    return NO_EXTENSION, 0


def _exp_in_l2(sign: int, dom: IntervalDomain) -> bool:
    # exp(sign*x)^2 blows up at +inf when sign>0 and at -inf when sign<0
    if sign > 0:
        return math.isfinite(dom.hi)
    return math.isfinite(dom.lo)


def momentum_deficiency(dom: IntervalDomain) -> DeficiencyReport:
    """``n_+`` counts ``L^2`` solutions ``exp(-x)``, ``n_-`` counts ``exp(+x)``."""
    n_plus = int(_exp_in_l2(-1, dom))
    n_minus = int(_exp_in_l2(+1, dom))
    cls, dim = classify_extension(n_plus, n_minus)
    return DeficiencyReport(n_plus, n_minus, cls, dim, _NOTES[cls])


def discretize_momentum(dom: IntervalDomain, grid_points: int, length: float = 20.0) -> TruncatedRep:
    """Central-difference ``-i d/dx`` on interior grid points, zero boundary values.

    Half-lines are cut at ``length``; the cut changes the deficiency structure,
    so the resulting matrix is only a quadrature aid.
    """
    if grid_points < 8:
        raise InvalidInputError("need at least 8 grid points")
    if dom.kind == "bounded":
        lo, hi = dom.lo, dom.hi
    elif dom.kind == "half_line_right":
        warnings.warn("half-line truncated to a bounded interval; deficiency indices of the matrix differ", stacklevel=2)
        lo, hi = dom.lo, dom.lo + length
    elif dom.kind == "half_line_left":
        warnings.warn("half-line truncated to a bounded interval; deficiency indices of the matrix differ", stacklevel=2)
        lo, hi = dom.hi - length, dom.hi
    else:
        raise InvalidInputError("full line cannot be discretized with zero boundary values")
    h = (hi - lo) / (grid_points + 1)
    D = (np.eye(grid_points, k=1) - np.eye(grid_points, k=-1)) / (2 * h)
    return TruncatedRep(-1j * D)


def grid_nodes(dom: IntervalDomain, grid_points: int, length: float = 20.0) -> np.ndarray:
    """Interior nodes matching :func:`discretize_momentum`."""
    if dom.kind == "bounded":
        lo, hi = dom.lo, dom.hi
    elif dom.kind == "half_line_right":
        lo, hi = dom.lo, dom.lo + length
    elif dom.kind == "half_line_left":
        lo, hi = dom.hi - length, dom.hi
    else:
        raise InvalidInputError("full line has no finite grid")
    return np.linspace(lo, hi, grid_points + 2)[1:-1]
