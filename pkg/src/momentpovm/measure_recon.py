"""Discrete measures reproducing a finite moment sequence.

The Jacobi (three-term recurrence) matrix is obtained from a partial Cholesky
factorization of the Hankel matrix and its eigen-decomposition yields the Gauss
quadrature. Both steps run in mpmath because Hankel matrices are
exponentially ill-conditioned; inputs and outputs stay in double precision.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import mpmath

from .errors import InvalidInputError, NumericError, RankDeficiencyError
from .moment_core import TOL_PSD, MomentSequence

DEFAULT_DPS = 50


@dataclass(frozen=True)
class DiscreteMeasure:
    atoms: tuple

    def __post_init__(self):
        atoms = tuple((float(x), float(w)) for x, w in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise InvalidInputError("measure needs at least one atom")
        if any(w < 0 for _, w in atoms):
            raise InvalidInputError("negative weight")
        if any(b[0] <= a[0] for a, b in zip(atoms, atoms[1:])):
            raise InvalidInputError("atom positions must be strictly increasing")
        if self.total_mass <= 0:
            raise InvalidInputError("total mass must be positive")

    @property
    def positions(self) -> list[float]:
        return [x for x, _ in self.atoms]

    @property
    def weights(self) -> list[float]:
        return [w for _, w in self.atoms]

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights)

    def to_json(self) -> dict:
        return {"atoms": [[x, w] for x, w in self.atoms]}

    @classmethod
    def from_json(cls, data: dict) -> "DiscreteMeasure":
        try:
            return cls(tuple(tuple(a) for a in data["atoms"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed measure: {exc}") from exc

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["position", "weight"])
        w.writerows([repr(x), repr(v)] for x, v in self.atoms)
        return buf.getvalue()


@dataclass(frozen=True)
class JacobiMatrix:
    """Recurrence coefficients: ``alpha`` on the diagonal, ``sqrt(beta)`` off it.

    ``mass`` is the total mass ``m_0`` carried over to the quadrature weights.
    """

    alpha: tuple
    beta: tuple
    mass: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if not self.alpha:
            raise InvalidInputError("empty Jacobi matrix")
        if len(self.beta) != len(self.alpha) - 1:
            raise InvalidInputError("need len(beta) == len(alpha) - 1")
        if any(not b > 0 for b in self.beta):
            raise InvalidInputError("beta entries must be positive")

    @property
    def order(self) -> int:
        return len(self.alpha)


def _jacobi_mp(ms: MomentSequence, n: int, tol_psd: float):
    """Partial Cholesky ``H = R^T R`` on rows ``0..n-1``; returns mp alpha, beta."""
    m = [mpmath.mpf(v) for v in ms.values[: 2 * n + 1]]
    R = [[mpmath.mpf(0)] * (n + 1) for _ in range(n)]
    for j in range(n):
        pivot = m[2 * j] - mpmath.fsum(R[k][j] ** 2 for k in range(j))
        if pivot <= tol_psd * abs(m[2 * j]) or pivot <= 0:
            raise RankDeficiencyError(j + 1)
        R[j][j] = mpmath.sqrt(pivot)
        for col in range(j + 1, n + 1):
            R[j][col] = (m[j + col] - mpmath.fsum(R[k][j] * R[k][col] for k in range(j))) / R[j][j]
    alpha, beta = [], []
    for j in range(n):
        a = R[j][j + 1] / R[j][j]
        if j > 0:
            a -= R[j - 1][j] / R[j - 1][j - 1]
        alpha.append(a)
        if j < n - 1:
            beta.append((R[j + 1][j + 1] / R[j][j]) ** 2)
    return alpha, beta


def jacobi_from_moments(ms: MomentSequence, n: int, tol_psd: float = TOL_PSD, dps: int = DEFAULT_DPS) -> JacobiMatrix:
    """Order-``n`` Jacobi matrix of the measure with moments ``ms``.

    Needs ``m_0 .. m_{2n}``. Raises :class:`RankDeficiencyError` naming the
    first order whose Hankel matrix is not strictly positive definite.
    """
    if n < 1 or 2 * n > ms.K:
        raise InvalidInputError(f"order {n} needs moments up to m_{2 * n}, have K={ms.K}")
    with mpmath.workdps(dps):
        alpha, beta = _jacobi_mp(ms, n, tol_psd)
        return JacobiMatrix(tuple(float(a) for a in alpha), tuple(float(b) for b in beta), ms.values[0])


def _gauss_mp(alpha, beta, mass):
    n = len(alpha)
    J = mpmath.matrix(n, n)
    for i in range(n):
        J[i, i] = alpha[i]
    for i in range(n - 1):
        J[i, i + 1] = J[i + 1, i] = mpmath.sqrt(beta[i])
    try:
        if n == 1:
            return [alpha[0]], [mpmath.mpf(mass)]
        evals, evecs = mpmath.eigsy(J)
    except Exception as exc:  # mpmath raises bare exceptions on non-convergence
        raise NumericError(f"tridiagonal eigensolver failed: {exc}") from exc
    nodes = [evals[i] for i in range(n)]
    weights = [mass * evecs[0, i] ** 2 for i in range(n)]
    order = sorted(range(n), key=lambda i: nodes[i])
    return [nodes[i] for i in order], [weights[i] for i in order]


def gauss_quadrature(j: JacobiMatrix, dps: int = DEFAULT_DPS) -> DiscreteMeasure:
    """Gauss rule of a Jacobi matrix: eigenvalues and ``mass * v_0^2``."""
    with mpmath.workdps(dps):
        alpha = [mpmath.mpf(a) for a in j.alpha]
        beta = [mpmath.mpf(b) for b in j.beta]
        nodes, weights = _gauss_mp(alpha, beta, mpmath.mpf(j.mass))
        return DiscreteMeasure(tuple((float(x), float(w)) for x, w in zip(nodes, weights)))


def measure_moments(m: DiscreteMeasure, K: int, dps: int = DEFAULT_DPS, kind: str = "hamburger") -> MomentSequence:
    """Moments ``sum_i w_i x_i^n`` for ``n = 0..K``."""
    with mpmath.workdps(dps):
        xs = [mpmath.mpf(x) for x in m.positions]
        ws = [mpmath.mpf(w) for w in m.weights]
        vals = [float(mpmath.fsum(w * x**n for x, w in zip(xs, ws))) for n in range(K + 1)]
    return MomentSequence(tuple(vals), kind)


@dataclass(frozen=True)
class VerificationResult:
    ok: bool
    max_rel_err: float

    def to_json(self) -> dict:
        return {"ok": self.ok, "max_rel_err": self.max_rel_err}


def verify_moment_solution(m: DiscreteMeasure, ms: MomentSequence, tol: float, dps: int = DEFAULT_DPS) -> VerificationResult:
    """Compare the moments of ``m`` with every entry of ``ms``.

    Errors are relative, except against zero targets where they are absolute.
    """
    got = measure_moments(m, ms.K, dps).values
    worst = 0.0
    for g, t in zip(got, ms.values):
        err = abs(g - t) if t == 0 else abs(g - t) / abs(t)
        worst = max(worst, err)
    return VerificationResult(worst <= tol, worst)


@dataclass(frozen=True)
class Reconstruction:
    measure: DiscreteMeasure
    jacobi: JacobiMatrix
    requested_order: int
    order: int

    @property
    def degenerate(self) -> bool:
        return self.order < self.requested_order

    def to_json(self) -> dict:
        out = self.measure.to_json()
        out.update(requested_order=self.requested_order, order=self.order, degenerate=self.degenerate)
        return out


def reconstruct_measure(ms: MomentSequence, n: int, tol_psd: float = TOL_PSD, dps: int = DEFAULT_DPS) -> Reconstruction:
    """``n``-point Gauss measure, falling back to the largest nonsingular order.

    A singular Hankel matrix means the moments come from a measure with fewer
    atoms; that smaller quadrature is returned and flagged as degenerate.
    """
    order = n
    while True:
        try:
            jac = jacobi_from_moments(ms, order, tol_psd, dps)
            break
        except RankDeficiencyError as exc:
            if exc.order <= 1:
                raise
            order = exc.order - 1
    return Reconstruction(gauss_quadrature(jac, dps), jac, n, order)
