"""Finite-dimensional POVMs on a cell decomposition of the real line.

A :class:`GridPOVM` assigns a positive matrix to each cell of a
:class:`CellGrid`; the effects sum to the identity. The module covers the
round trips between POVMs and families of per-cell measures:

* :func:`induced_family` turns a POVM and probe vectors into measures
  ``mu_b(E) = <psi_b | Q(E) psi_b>``;
* :func:`family_to_povm` recovers the POVM from such a family through the
  polarization identity;
* :func:`naimark_dilate` realizes the POVM as a compressed PVM;
* :func:`compress_povm` restricts a POVM to a subspace.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    ConditioningError,
    IncompleteFamilyError,
    InvalidInputError,
    NumericError,
    PositivityError,
    UnderdeterminedError,
)

TOL_PSD = 1e-10
TOL_SUM = 1e-10
TOL_RECON = 1e-10
TOL_TAIL = 1e-6

_PHASES = (1, 1j, -1, -1j)


@dataclass(frozen=True, eq=False)
class CellGrid:
    """Cells ``(-inf, x_1], (x_1, x_2], ..., (x_{M-1}, inf)`` with representatives."""

    boundaries: np.ndarray
    representatives: np.ndarray

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.boundaries, dtype=float))
        r = np.atleast_1d(np.asarray(self.representatives, dtype=float))
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "representatives", r)
        if b.size < 1 or not np.all(np.isfinite(b)) or np.any(np.diff(b) <= 0):
            raise InvalidInputError("boundaries must be finite and strictly increasing")
        if r.size != b.size + 1:
            raise InvalidInputError(f"{b.size + 1} cells need {b.size + 1} representatives, got {r.size}")
        if not np.array_equal(self.cell_of(r), np.arange(r.size)):
            raise InvalidInputError("every representative must lie in its own cell")

    @property
    def M(self) -> int:
        return self.boundaries.size + 1

    @classmethod
    def from_boundaries(cls, boundaries: Sequence[float]) -> "CellGrid":
        """Midpoints inside, tails clamped one median cell width beyond the ends."""
        b = np.atleast_1d(np.asarray(boundaries, dtype=float))
        widths = np.diff(b)
        delta = float(np.median(widths)) if widths.size else 1.0
        reps = np.concatenate([[b[0] - delta], (b[:-1] + b[1:]) / 2, [b[-1] + delta]])
        return cls(b, reps)

    @classmethod
    def uniform(cls, lo: float, hi: float, cells: int) -> "CellGrid":
        """``cells`` equal finite cells on ``[lo, hi]`` plus the two tails."""
        return cls.from_boundaries(np.linspace(lo, hi, cells + 1))

    def cell_of(self, x) -> np.ndarray:
        return np.searchsorted(self.boundaries, np.asarray(x, dtype=float), side="left")

    def to_json(self) -> dict:
        return {"boundaries": self.boundaries.tolist(), "representatives": self.representatives.tolist()}


def _as_matrix_stack(effects) -> np.ndarray:
    arr = np.asarray(effects, dtype=complex)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise InvalidInputError("effects must be a stack of square matrices")
    return arr


@dataclass(frozen=True, eq=False)
class GridPOVM:
    grid: CellGrid
    effects: np.ndarray

    def __post_init__(self):
        eff = _as_matrix_stack(self.effects)
        object.__setattr__(self, "effects", eff)
        if eff.shape[0] != self.grid.M:
            raise InvalidInputError(f"grid has {self.grid.M} cells but {eff.shape[0]} effects were given")

    @property
    def dim(self) -> int:
        return self.effects.shape[1]

    def to_json(self) -> dict:
        return {
            **self.grid.to_json(),
            "effects": [[[[v.real, v.imag] for v in row] for row in Q] for Q in self.effects],
        }

    @classmethod
    def from_json(cls, data: dict) -> "GridPOVM":
        try:
            grid = CellGrid(data["boundaries"], data["representatives"])
            raw = np.asarray(data["effects"], dtype=float)
            if raw.ndim != 4 or raw.shape[-1] != 2:
                raise InvalidInputError("effects must be nested [[re, im], ...] rows")
            return cls(grid, raw[..., 0] + 1j * raw[..., 1])
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidInputError):
                raise
            raise InvalidInputError(f"malformed POVM: {exc}") from exc


@dataclass(frozen=True)
class PovmValidation:
    ok: bool
    worst_eig: float
    sum_defect: float
    hermitian_defect: float

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "worst_eig": self.worst_eig,
            "sum_defect": self.sum_defect,
            "hermitian_defect": self.hermitian_defect,
        }


def validate_povm(q: GridPOVM, tol_psd: float = TOL_PSD, tol_sum: float = TOL_SUM) -> PovmValidation:
    """Hermiticity, positivity and normalization of every effect.

    ``worst_eig`` is the smallest effect eigenvalue relative to the norm of
    the effect sum; ``sum_defect`` is ``||sum_i Q_i - I||_2``.
    """
    eff = q.effects
    herm = float(np.max(np.abs(eff - np.conj(np.transpose(eff, (0, 2, 1))))))
    total = eff.sum(axis=0)
    scale = max(np.linalg.norm(total, 2), 1.0)
    sym = (eff + np.conj(np.transpose(eff, (0, 2, 1)))) / 2
    worst = float(min(np.linalg.eigvalsh(Q)[0] for Q in sym) / scale)
    defect = float(np.linalg.norm(total - np.eye(q.dim), 2))
    ok = herm <= tol_sum and worst >= -tol_psd and defect <= tol_sum
    return PovmValidation(ok, worst, defect, herm)


def is_pvm(q: GridPOVM, tol: float = 1e-10) -> bool:
    """Effects are idempotent (hence mutually orthogonal, given they sum to I)."""
    return all(np.max(np.abs(Q @ Q - Q)) <= tol for Q in q.effects)


def _psd_sqrt(Q: np.ndarray, tol_psd: float) -> np.ndarray:
    w, U = np.linalg.eigh((Q + Q.conj().T) / 2)
    if w[0] < -tol_psd * max(1.0, abs(w[-1])):
        raise PositivityError(f"effect has eigenvalue {w[0]:.3e}")
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.conj().T


@dataclass(frozen=True, eq=False)
class NaimarkDilation:
    """Isometry ``V`` into ``C^{M d}`` and the block projectors ``P_i``."""

    isometry: np.ndarray
    blocks: np.ndarray

    @property
    def dilated_dim(self) -> int:
        return self.isometry.shape[0]

    def compress(self, i: int) -> np.ndarray:
        return self.isometry.conj().T @ self.blocks[i] @ self.isometry

    def to_json(self) -> dict:
        V = self.isometry
        return {
            "dilated_dim": self.dilated_dim,
            "isometry": [[[v.real, v.imag] for v in row] for row in V],
        }


def naimark_dilate(q: GridPOVM, tol_psd: float = TOL_PSD) -> NaimarkDilation:
    """Stack ``Q_i^{1/2}``; block ``i`` of the dilated space carries cell ``i``."""
    d, M = q.dim, q.grid.M
    V = np.concatenate([_psd_sqrt(Q, tol_psd) for Q in q.effects], axis=0)
    blocks = np.zeros((M, M * d, M * d), dtype=complex)
    for i in range(M):
        blocks[i, i * d:(i + 1) * d, i * d:(i + 1) * d] = np.eye(d)
    return NaimarkDilation(V, blocks)


def dilation_residuals(q: GridPOVM, dil: NaimarkDilation) -> dict:
    """Max-norm residuals of the dilation laws."""
    V, P = dil.isometry, dil.blocks
    n = dil.dilated_dim
    return {
        "isometry": float(np.max(np.abs(V.conj().T @ V - np.eye(q.dim)))),
        "compression": float(max(np.max(np.abs(dil.compress(i) - Q)) for i, Q in enumerate(q.effects))),
        "idempotent": float(max(np.max(np.abs(p @ p - p)) for p in P)),
        "orthogonal": float(max((np.max(np.abs(P[i] @ P[j])) for i in range(len(P)) for j in range(len(P)) if i != j), default=0.0)),
        "resolution": float(np.max(np.abs(P.sum(axis=0) - np.eye(n)))),
    }


def povm_integral_operator(q: GridPOVM) -> np.ndarray:
    """``sum_i lambda_i Q_i`` with the cell representatives as ``lambda_i``."""
    A = np.tensordot(q.grid.representatives, q.effects, axes=1)
    return (A + A.conj().T) / 2


def povm_second_moment_operator(q: GridPOVM) -> np.ndarray:
    A = np.tensordot(q.grid.representatives**2, q.effects, axes=1)
    return (A + A.conj().T) / 2


def decompose_check(q: GridPOVM, a, domain_dim: int, tol: float = 1e-10) -> bool:
    """Whether ``q`` decomposes the operator ``a`` on its first ``domain_dim`` basis vectors.

    For every basis vector ``phi`` of the domain this checks
    ``<psi|A phi> = sum_i lambda_i <psi|Q_i phi>`` for all basis ``psi`` and
    ``||A phi||^2 = sum_i lambda_i^2 <phi|Q_i phi>``.
    """
    A = np.asarray(getattr(a, "matrix", a), dtype=complex)
    if A.shape != (q.dim, q.dim):
        raise InvalidInputError(f"operator shape {A.shape} does not match POVM dimension {q.dim}")
    if not 0 < domain_dim <= q.dim:
        raise InvalidInputError("domain_dim out of range")
    first = povm_integral_operator(q)
    lam2 = q.grid.representatives**2
    for k in range(domain_dim):
        if np.max(np.abs(A[:, k] - first[:, k])) > tol:
            return False
        second = float(np.real(np.dot(lam2, q.effects[:, k, k])))
        if abs(np.vdot(A[:, k], A[:, k]).real - second) > tol * max(1.0, abs(second)):
            return False
    return True


@dataclass(frozen=True)
class CombinationTable:
    """Which labels of a family stand for which linear combinations.

    ``parallelograms``: ``(b, c, label of b+c, label of b-c)``;
    ``scalings``: ``(b, z, label of z b)``;
    ``polarizations``: ``(b, c, (labels of b + i^k c for k = 0..3))``;
    ``directions``: ``(b, c, ((t, label of b + t c), ...))``.
    """

    parallelograms: tuple = ()
    scalings: tuple = ()
    polarizations: tuple = ()
    directions: tuple = ()

    def to_json(self) -> dict:
        return {
            "parallelograms": [list(p) for p in self.parallelograms],
            "scalings": [[b, [complex(z).real, complex(z).imag], zb] for b, z, zb in self.scalings],
            "polarizations": [[b, c, list(ls)] for b, c, ls in self.polarizations],
            "directions": [[b, c, [[t, l] for t, l in ts]] for b, c, ts in self.directions],
        }

    @classmethod
    def from_json(cls, data: dict) -> "CombinationTable":
        return cls(
            tuple(tuple(p) for p in data.get("parallelograms", [])),
            tuple((b, complex(*z), zb) for b, z, zb in data.get("scalings", [])),
            tuple((b, c, tuple(ls)) for b, c, ls in data.get("polarizations", [])),
            tuple((b, c, tuple((float(t), l) for t, l in ts)) for b, c, ts in data.get("directions", [])),
        )


@dataclass(frozen=True)
class ProbeSet:
    labels: tuple
    vectors: np.ndarray
    table: CombinationTable
    base: tuple = ()


def probe_closure(base_vectors, base_labels: Sequence[str] | None = None, t_steps: int = 6) -> ProbeSet:
    """Close a list of vectors under the combinations needed downstream.

    For every pair ``j < k`` of base vectors this adds ``b + i^m c`` for
    ``m = 0..3``, the rotated vector ``i c`` and ``b + t c`` for
    ``t = 2^-1 .. 2^-t_steps``; the matching :class:`CombinationTable` lists
    parallelogram, scaling, polarization and directional relations.
    """
    base = [np.asarray(v, dtype=complex) for v in base_vectors]
    if not base:
        raise InvalidInputError("need at least one probe vector")
    names = list(base_labels) if base_labels is not None else [f"v{j}" for j in range(len(base))]
    labels, vecs = list(names), list(base)
    index = {l: i for i, l in enumerate(labels)}

    def add(label, vec):
        if label not in index:
            index[label] = len(labels)
            labels.append(label)
            vecs.append(vec)
        return label

    paras, scals, pols, dirs = [], [], [], []
    for j, b in enumerate(names):
        scals.append((b, 2.0, add(f"2*{b}", 2 * base[j])))
        ib = add(f"i*{b}", 1j * base[j])
        scals.append((b, 1j, ib))
        add(f"0*{b}", 0 * base[j])
        scals.append((b, 0.0, f"0*{b}"))
    for j, b in enumerate(names):
        for k in range(j + 1, len(names)):
            c = names[k]
            combo = tuple(add(f"{b}+{_phase_name(m)}{c}", base[j] + _PHASES[m] * base[k]) for m in range(4))
            pols.append((b, c, combo))
            paras.append((b, c, combo[0], combo[2]))
            paras.append((b, f"i*{c}", combo[1], combo[3]))
            steps = tuple(
                (2.0**-s, add(f"{b}+2^-{s}{c}", base[j] + 2.0**-s * base[k])) for s in range(1, t_steps + 1)
            )
            dirs.append((b, c, steps))
    table = CombinationTable(tuple(paras), tuple(scals), tuple(pols), tuple(dirs))
    return ProbeSet(tuple(labels), np.array(vecs), table, tuple(names))


def _phase_name(m: int) -> str:
    return ("", "i", "-", "-i")[m]


@dataclass(frozen=True, eq=False)
class ConsistentFamily:
    """Per-label vectors ``psi_b`` and cell masses ``mu_b(E_i)``."""

    labels: tuple
    vectors: np.ndarray
    measures: np.ndarray
    grid: CellGrid | None = None
    table: CombinationTable | None = None

    def __post_init__(self):
        labels = tuple(str(l) for l in self.labels)
        object.__setattr__(self, "labels", labels)
        vecs = np.asarray(self.vectors, dtype=complex)
        meas = np.asarray(self.measures, dtype=float)
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "measures", meas)
        if len(set(labels)) != len(labels):
            raise InvalidInputError("duplicate labels")
        if vecs.ndim != 2 or vecs.shape[0] != len(labels):
            raise InvalidInputError("need one vector per label")
        if meas.ndim != 2 or meas.shape[0] != len(labels):
            raise InvalidInputError("need one measure row per label")
        if self.grid is not None and meas.shape[1] != self.grid.M:
            raise InvalidInputError("measure rows do not match the grid")

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise IncompleteFamilyError(f"family has no entry {label!r}") from None

    def measure(self, label: str) -> np.ndarray:
        return self.measures[self.index(label)]

    def vector(self, label: str) -> np.ndarray:
        return self.vectors[self.index(label)]

    def with_measures(self, measures) -> "ConsistentFamily":
        return ConsistentFamily(self.labels, self.vectors, measures, self.grid, self.table)

    def to_json(self) -> dict:
        out = {
            "labels": list(self.labels),
            "vectors": [[[v.real, v.imag] for v in row] for row in self.vectors],
            "measures": self.measures.tolist(),
        }
        if self.grid is not None:
            out["grid"] = self.grid.to_json()
        if self.table is not None:
            out["table"] = self.table.to_json()
        return out

    @classmethod
    def from_json(cls, data: dict) -> "ConsistentFamily":
        try:
            raw = np.asarray(data["vectors"], dtype=float)
            grid = data.get("grid")
            table = data.get("table")
            return cls(
                tuple(data["labels"]),
                raw[..., 0] + 1j * raw[..., 1],
                data["measures"],
                CellGrid(grid["boundaries"], grid["representatives"]) if grid else None,
                CombinationTable.from_json(table) if table else None,
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            if isinstance(exc, InvalidInputError):
                raise
            raise InvalidInputError(f"malformed family: {exc}") from exc

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label"] + [f"cell_{i}" for i in range(self.measures.shape[1])])
        for l, row in zip(self.labels, self.measures):
            w.writerow([l] + [repr(float(v)) for v in row])
        return buf.getvalue()


def induced_family(
    q: GridPOVM,
    vectors,
    labels: Sequence[str] | None = None,
    table: CombinationTable | None = None,
) -> ConsistentFamily:
    """``mu_b(E_i) = <psi_b | Q_i psi_b>`` for each probe vector.

    ``vectors`` may also be a :class:`ProbeSet`, whose labels and table are
    carried over.
    """
    if isinstance(vectors, ProbeSet):
        labels, table, vectors = vectors.labels, vectors.table, vectors.vectors
    V = np.atleast_2d(np.asarray(vectors, dtype=complex))
    if V.shape[1] != q.dim:
        raise InvalidInputError(f"vectors have dimension {V.shape[1]}, POVM has {q.dim}")
    if labels is None:
        labels = tuple(f"v{j}" for j in range(V.shape[0]))
    masses = np.einsum("bi,cij,bj->bc", V.conj(), q.effects, V).real
    return ConsistentFamily(tuple(labels), V, masses, q.grid, table)


@dataclass(frozen=True)
class ConsistencyResult:
    ok: bool
    worst_defect: float
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"ok": self.ok, "worst_defect": self.worst_defect, "details": self.details}


def consistency_check(f: ConsistentFamily, closure: CombinationTable | None = None, tol: float = 1e-10) -> ConsistencyResult:
    """Check the parallelogram and scaling identities cell by cell.

    Also checks ``mu_b(R) = ||psi_b||^2``. Directional continuity is a limit
    statement and is only falsified: the quadratic extrapolation of
    ``mu_{b+tc} - mu_b`` to ``t = 0`` must vanish. Whether the sampled
    defects shrink monotonically is reported but does not decide ``ok``,
    since the linear and quadratic terms may cancel at some sampled ``t``.
    Defects are relative to the largest mass.
    """
    table = closure if closure is not None else f.table
    if table is None:
        raise IncompleteFamilyError("no combination table supplied")
    scale = max(1.0, float(np.max(np.abs(f.measures)))) if f.measures.size else 1.0
    worst = {"parallelogram": 0.0, "scaling": 0.0, "normalization": 0.0, "direction": 0.0, "positivity": 0.0}
    monotone = True

    for b, c, plus, minus in table.parallelograms:
        mu_c = f.measure(c)
        lhs = f.measure(plus) + f.measure(minus)
        rhs = 2 * (f.measure(b) + mu_c)
        worst["parallelogram"] = max(worst["parallelogram"], float(np.max(np.abs(lhs - rhs))))
    for b, z, zb in table.scalings:
        d = np.abs(f.measure(zb) - abs(z) ** 2 * f.measure(b))
        worst["scaling"] = max(worst["scaling"], float(np.max(d)))
    for b, c, steps in table.directions:
        mu_b = f.measure(b)
        ts = np.array([t for t, _ in steps])
        rows = np.array([f.measure(l) for _, l in steps])
        defects = np.max(np.abs(rows - mu_b), axis=1)
        order = np.argsort(-ts)
        d_sorted = defects[order]
        if np.any(np.diff(d_sorted) > tol * scale):
            monotone = False
        deg = min(2, len(ts) - 1)
        if deg >= 1:
            coef = np.polynomial.polynomial.polyfit(ts, rows - mu_b, deg)
            worst["direction"] = max(worst["direction"], float(np.max(np.abs(coef[0]))))
    norms = np.einsum("bi,bi->b", f.vectors.conj(), f.vectors).real
    worst["normalization"] = float(np.max(np.abs(f.measures.sum(axis=1) - norms)))
    worst["positivity"] = float(max(0.0, -np.min(f.measures)))

    defect = max(worst.values()) / scale
    ok = defect <= tol
    return ConsistencyResult(ok, defect, {**worst, "direction_monotone": monotone})


def polarized_matrix(masses_by_phase: Sequence[np.ndarray]) -> np.ndarray:
    """``(1/4) sum_k (-i)^k mu_{b + i^k c}`` for the four phase-shifted entries."""
    return sum(((-1j) ** k) * np.asarray(m) for k, m in enumerate(masses_by_phase)) / 4


def family_to_povm(
    f: ConsistentFamily,
    table: CombinationTable | None = None,
    max_condition: float = 1e12,
    tol_psd: float = TOL_PSD,
    tol_sum: float = TOL_SUM,
) -> GridPOVM:
    """Recover the unique POVM generating a consistent family.

    The polarization identity gives ``G_E[b, c] = <psi_b | Q(E) psi_c>`` for
    every pair of base probes; ``Q(E)`` then solves ``Psi^dagger Q Psi = G``
    by least squares, ``Psi`` holding the base probes as columns.
    """
    table = table if table is not None else f.table
    if f.grid is None:
        raise InvalidInputError("family carries no cell grid")
    base = _base_labels(f, table)
    Psi = np.array([f.vector(b) for b in base]).T
    d = Psi.shape[0]
    sv = np.linalg.svd(Psi, compute_uv=False)
    rank = int(np.sum(sv > sv[0] * 1e-12)) if sv.size and sv[0] > 0 else 0
    if rank < d:
        raise UnderdeterminedError(f"probe vectors span only {rank} of {d} dimensions", base)
    cond = float(sv[0] / sv[d - 1])
    if cond > max_condition:
        raise ConditioningError(f"probe matrix condition number {cond:.3e} exceeds {max_condition:.1e}", base, cond)

    pos = {b: j for j, b in enumerate(base)}
    M = f.measures.shape[1]
    G = np.zeros((M, len(base), len(base)), dtype=complex)
    for b in base:
        G[:, pos[b], pos[b]] = f.measure(b)
    for b, c, combo in (table.polarizations if table else ()):
        if b not in pos or c not in pos:
            continue
        val = polarized_matrix([f.measure(l) for l in combo])
        G[:, pos[b], pos[c]] = val
        G[:, pos[c], pos[b]] = np.conj(val)
    missing = [(b, c) for i, b in enumerate(base) for c in base[i + 1:] if not _has_polarization(table, b, c)]
    if missing:
        raise IncompleteFamilyError(f"missing polarization entries for pairs {missing}")

    left = np.linalg.pinv(Psi.conj().T)
    right = np.linalg.pinv(Psi)
    effects = np.einsum("ij,cjk,kl->cil", left, G, right)
    effects = (effects + np.conj(np.transpose(effects, (0, 2, 1)))) / 2
    q = GridPOVM(f.grid, effects)
    check = validate_povm(q, tol_psd, tol_sum)
    if not check.ok:
        raise NumericError(
            f"reconstructed effects are not a normalized POVM (worst eigenvalue {check.worst_eig:.3e}, "
            f"sum defect {check.sum_defect:.3e})"
        )
    return q


def _has_polarization(table, b, c) -> bool:
    return table is not None and any({x, y} == {b, c} for x, y, _ in table.polarizations)


def _base_labels(f: ConsistentFamily, table: CombinationTable | None) -> tuple:
    seen = []
    if table is not None:
        pairs = [(b, c) for b, c, _ in table.polarizations] or [(b,) for b, _, _ in table.scalings]
        for pair in pairs:
            for x in pair:
                if x not in seen:
                    seen.append(x)
    return tuple(seen) if seen else tuple(f.labels)


@dataclass(frozen=True)
class PolarizationResult:
    gram: np.ndarray
    hermitian_defect: float
    min_eigenvalue: float
    parallelogram_defect: float
    psd: bool

    def to_json(self) -> dict:
        return {
            "gram": [[[v.real, v.imag] for v in row] for row in self.gram],
            "hermitian_defect": self.hermitian_defect,
            "min_eigenvalue": self.min_eigenvalue,
            "parallelogram_defect": self.parallelogram_defect,
            "psd": self.psd,
        }


def seminorm_polarization(vectors, p_squared: Callable | Mapping, tol: float = 1e-10) -> PolarizationResult:
    """Gram matrix ``(x_j | x_k) = (1/4) sum_m (-i)^m p(x_j + i^m x_k)^2``.

    ``p_squared`` is either a callable on vectors or a mapping
    ``(j, k, m) -> p(x_j + i^m x_k)^2``. A Gram matrix that is not Hermitian
    PSD (within ``tol``) falsifies the parallelogram hypothesis; it is
    reported, not raised.
    """
    X = [np.asarray(v, dtype=complex) for v in vectors]
    n = len(X)
    if callable(p_squared):
        table = {(j, k, m): float(p_squared(X[j] + _PHASES[m] * X[k])) for j in range(n) for k in range(n) for m in range(4)}
    else:
        table = dict(p_squared)
    G = np.zeros((n, n), dtype=complex)
    for j in range(n):
        for k in range(n):
            try:
                G[j, k] = polarized_matrix([table[(j, k, m)] for m in range(4)])
            except KeyError as exc:
                raise IncompleteFamilyError(f"missing p^2 value for {exc.args[0]}") from None
    herm = float(np.max(np.abs(G - G.conj().T))) if n else 0.0
    para = 0.0
    for j in range(n):
        for k in range(n):
            lhs = table[(j, k, 0)] + table[(j, k, 2)]
            rhs = 2 * (table[(j, j, 0)] / 4 + table[(k, k, 0)] / 4)
            para = max(para, abs(lhs - rhs))
    scale = max(1.0, float(np.max(np.abs(G)))) if n else 1.0
    lo = float(np.linalg.eigvalsh((G + G.conj().T) / 2)[0]) if n else 0.0
    psd = herm <= tol * scale and lo >= -tol * scale
    return PolarizationResult(G, herm, lo, para, psd)


def compress_povm(q: GridPOVM, subspace_basis, tol: float = 1e-12) -> GridPOVM:
    """Effects ``B^dagger Q_i B`` for an orthonormal basis (columns of ``B``)."""
    B = np.asarray(subspace_basis, dtype=complex)
    if B.ndim == 1:
        B = B[:, None]
    if B.shape[0] != q.dim and B.shape[1] == q.dim:
        B = B.T
    if B.shape[0] != q.dim:
        raise InvalidInputError("basis vectors do not live in the POVM space")
    if np.max(np.abs(B.conj().T @ B - np.eye(B.shape[1]))) > tol:
        raise InvalidInputError("subspace basis is not orthonormal")
    eff = np.einsum("ji,cjk,kl->cil", B.conj(), q.effects, B)
    return GridPOVM(q.grid, eff)


def spectral_pvm(A: np.ndarray, grid: CellGrid) -> GridPOVM:
    """PVM of a Hermitian matrix binned onto ``grid``."""
    A = np.asarray(A, dtype=complex)
    w, U = np.linalg.eigh((A + A.conj().T) / 2)
    cells = grid.cell_of(w)
    eff = np.zeros((grid.M, A.shape[0], A.shape[0]), dtype=complex)
    for i, c in enumerate(cells):
        eff[c] += np.outer(U[:, i], U[:, i].conj())
    return GridPOVM(grid, eff)


def random_povm(d: int, M: int, rng: np.random.Generator, grid: CellGrid | None = None) -> GridPOVM:
    """Random full-rank POVM ``S^{-1/2} A_i S^{-1/2}`` from Ginibre ``A_i``."""
    G = rng.normal(size=(M, d, d)) + 1j * rng.normal(size=(M, d, d))
    A = G @ np.conj(np.transpose(G, (0, 2, 1)))
    S = A.sum(axis=0)
    w, U = np.linalg.eigh(S)
    S_inv_half = (U / np.sqrt(w)) @ U.conj().T
    eff = S_inv_half @ A @ S_inv_half
    eff = (eff + np.conj(np.transpose(eff, (0, 2, 1)))) / 2
    if grid is None:
        grid = CellGrid.uniform(-1.0, 1.0, M - 2) if M > 2 else CellGrid.from_boundaries([0.0])
    return GridPOVM(grid, eff)


@dataclass(frozen=True, eq=False)
class HalflineMeasures:
    masses: np.ndarray
    norm_squared: float
    total_mass: float
    first_moment: float
    spectral_first_moment: float
    tail_fraction: float
    truncation_warning: bool
    tail_warning: bool

    @property
    def plancherel_defect(self) -> float:
        return abs(self.total_mass - self.norm_squared)

    def to_json(self) -> dict:
        return {
            "masses": self.masses.tolist(),
            "norm_squared": self.norm_squared,
            "total_mass": self.total_mass,
            "plancherel_defect": self.plancherel_defect,
            "first_moment": self.first_moment,
            "spectral_first_moment": self.spectral_first_moment,
            "tail_fraction": self.tail_fraction,
            "truncation_warning": self.truncation_warning,
            "tail_warning": self.tail_warning,
        }

    def to_csv(self, grid: CellGrid) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cell", "representative", "mass"])
        for i, (r, m) in enumerate(zip(grid.representatives, self.masses)):
            w.writerow([i, repr(float(r)), repr(float(m))])
        return buf.getvalue()


def halfline_momentum_measures(
    window,
    length: float,
    grid: CellGrid,
    pad_factor: int = 2,
    decay_tol: float = 1e-8,
    tol_tail: float = TOL_TAIL,
) -> HalflineMeasures:
    """Per-cell momentum masses ``int_E |F(chi)(k)|^2 dk`` of a half-line window.

    ``window`` holds samples of ``chi`` at ``x_j = j * length / n``,
    ``j = 0..n-1``, with ``n`` a power of two. The function is extended by
    zero, Fourier transformed with the unitary convention
    ``(2 pi)^{-1/2} int e^{-ikx} f(x) dx`` on the FFT grid, and ``|F|^2 dk``
    is summed over each momentum cell.
    """
    f = np.asarray(window, dtype=complex)
    n = f.size
    if n < 2 or n & (n - 1):
        raise InvalidInputError("sample count must be a power of two")
    h = length / n
    peak = max(float(np.max(np.abs(f))), np.finfo(float).tiny)
    truncation = bool(abs(f[0]) > decay_tol * peak or abs(f[-1]) > decay_tol * peak)

    total_n = pad_factor * n
    F = np.fft.fft(f, total_n) * h / math.sqrt(2 * math.pi)
    k = 2 * math.pi * np.fft.fftfreq(total_n, d=h)
    dk = 2 * math.pi / (total_n * h)
    density = np.abs(F) ** 2 * dk
    cells = grid.cell_of(k)
    masses = np.bincount(cells, weights=density, minlength=grid.M)
    norm_sq = float(np.sum(np.abs(f) ** 2) * h)
    total = float(masses.sum())
    tail = float((masses[0] + masses[-1]) / total) if total > 0 else 0.0
    return HalflineMeasures(
        masses=masses,
        norm_squared=norm_sq,
        total_mass=total,
        first_moment=float(np.dot(grid.representatives, masses)),
        spectral_first_moment=float(np.dot(k, density)),
        tail_fraction=tail,
        truncation_warning=truncation,
        tail_warning=tail > tol_tail,
    )


def halfline_momentum_povm(n: int, length: float, grid: CellGrid) -> GridPOVM:
    """Momentum PVM on a periodic grid over ``[-length, length)`` compressed to ``x >= 0``.

    The compression onto the half-line coordinates is a POVM but not a PVM.
    """
    total = 2 * n
    h = length / n
    x = -length + h * np.arange(total)
    F = np.fft.fft(np.eye(total), axis=0, norm="ortho")
    k = 2 * math.pi * np.fft.fftfreq(total, d=h)
    pvm_eff = np.zeros((grid.M, total, total), dtype=complex)
    cells = grid.cell_of(k)
    for c in range(grid.M):
        sel = cells == c
        Fc = F[sel]
        pvm_eff[c] = Fc.conj().T @ Fc
    basis = np.eye(total)[:, x >= -h / 2]
    return compress_povm(GridPOVM(grid, pvm_eff), basis)
