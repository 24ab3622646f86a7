"""Existence and determinacy analysis for Hamburger and Stieltjes moment problems.

Existence is decided by positivity of Hankel matrices. Determinacy is probed
with three classical criteria applied to finite data: Carleman (divergence of
``sum m_{2n}^{-1/(2n)}``), Cramér (factorial growth bound of the even moments)
and Krein (finiteness of the log-integral of a density). The first two can
only certify determinacy and the third only indeterminacy; anything else is
reported as ``inconclusive``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy import integrate

from .errors import InvalidDensityError, InvalidInputError

TOL_PSD = 1e-10
TOL_KREIN = 1e-6

HAMBURGER = "hamburger"
STIELTJES = "stieltjes"

DETERMINATE = "determinate"
INDETERMINATE = "indeterminate"
INCONCLUSIVE = "inconclusive"

# sizes above this many moments go through mpmath
_EXTENDED_PRECISION_THRESHOLD = 20


@dataclass(frozen=True)
class MomentSequence:
    """Real moments ``m_0, ..., m_K`` of a candidate measure.

    The all-zero sequence is accepted as the moment sequence of the zero
    measure (a singular deformation); any other sequence needs ``m_0 > 0``.
    """

    values: tuple
    kind: str = HAMBURGER

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if self.kind not in (HAMBURGER, STIELTJES):
            raise InvalidInputError(f"unknown moment problem kind {self.kind!r}")
        if len(vals) < 3:
            raise InvalidInputError("need at least m_0, m_1, m_2")
        if not all(math.isfinite(v) for v in vals):
            raise InvalidInputError("moment sequence contains non-finite values")
        if vals[0] <= 0 and not self.is_zero:
            raise InvalidInputError("m_0 must be positive")

    @property
    def K(self) -> int:
        return len(self.values) - 1

    @property
    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.values)

    def scaled(self, c: float) -> "MomentSequence":
        return MomentSequence(tuple(c * v for v in self.values), self.kind)

    def to_json(self) -> dict:
        return {"kind": self.kind, "values": list(self.values)}

    @classmethod
    def from_json(cls, data: dict) -> "MomentSequence":
        try:
            return cls(tuple(data["values"]), data.get("kind", HAMBURGER))
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed moment sequence: {exc}") from exc


@dataclass(frozen=True)
class DeterminacyVerdict:
    status: str
    criterion: str
    diagnostics: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "diagnostics", tuple((str(k), float(v)) for k, v in self.diagnostics))
        if self.status == DETERMINATE and self.criterion not in ("carleman", "cramer"):
            raise ValueError("determinate verdicts come from carleman or cramer")
        if self.status == INDETERMINATE and self.criterion != "krein":
            raise ValueError("indeterminate verdicts come from krein")

    def diagnostic(self, label: str) -> float:
        return dict(self.diagnostics)[label]

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "criterion": self.criterion,
            "diagnostics": [[k, v] for k, v in self.diagnostics],
        }


@dataclass(frozen=True)
class DensitySpec:
    """A nonnegative density on the full line or on ``[0, inf)``.

    ``log_evaluator`` is optional; supplying it avoids underflow of ``f`` far
    out in the tails.
    """

    evaluator: Callable[[float], float]
    support: str = "full_line"
    name: str = ""
    log_evaluator: Callable[[float], float] | None = None

    def __post_init__(self):
        if self.support not in ("full_line", "half_line"):
            raise InvalidInputError(f"unknown support {self.support!r}")


@dataclass(frozen=True)
class ExistenceResult:
    feasible: bool
    min_eigenvalue: float

    def to_json(self) -> dict:
        return {"feasible": self.feasible, "min_eigenvalue": self.min_eigenvalue}


def hankel_matrix(values: Sequence, n: int) -> np.ndarray:
    """``(n+1) x (n+1)`` Hankel matrix with entries ``values[i + j]``."""
    idx = np.add.outer(np.arange(n + 1), np.arange(n + 1))
    return np.asarray(values, dtype=float)[idx]


def _normalized_min_eig(values, n: int, dps: int) -> float:
    if len(values) > _EXTENDED_PRECISION_THRESHOLD + 1:
        with mpmath.workdps(dps):
            H = mpmath.matrix(n + 1, n + 1)
            for i in range(n + 1):
                for j in range(n + 1):
                    H[i, j] = mpmath.mpf(values[i + j])
            eig = mpmath.eigsy(H, eigvals_only=True)
            lo = min(eig)
            scale = max(abs(e) for e in eig)
            return 0.0 if scale == 0 else float(lo / scale)
    eig = np.linalg.eigvalsh(hankel_matrix(values, n))
    scale = np.abs(eig).max()
    return 0.0 if scale == 0 else float(eig[0] / scale)


def _hankel_scan(values, tol_psd: float, dps: int) -> ExistenceResult:
    worst = math.inf
    for n in range((len(values) - 1) // 2 + 1):
        worst = min(worst, _normalized_min_eig(values, n, dps))
    return ExistenceResult(worst >= -tol_psd, worst)


def hamburger_existence(ms: MomentSequence, tol_psd: float = TOL_PSD, dps: int = 50) -> ExistenceResult:
    """Check that every Hankel matrix ``H_n``, ``n <= K // 2``, is PSD.

    An odd-length tail moment is simply ignored. Sequences longer than 21
    entries are handled in ``dps``-digit arithmetic.
    """
    return _hankel_scan(ms.values, tol_psd, dps)


def stieltjes_existence(ms: MomentSequence, tol_psd: float = TOL_PSD, dps: int = 50) -> ExistenceResult:
    """Hankel positivity of both ``(m_0, m_1, ...)`` and ``(m_1, m_2, ...)``."""
    base = _hankel_scan(ms.values, tol_psd, dps)
    shifted = _hankel_scan(ms.values[1:], tol_psd, dps)
    worst = min(base.min_eigenvalue, shifted.min_eigenvalue)
    return ExistenceResult(base.feasible and shifted.feasible, worst)


def _even_moments(ms: MomentSequence) -> list[float]:
    """``[m_2, m_4, ...]`` indexed from n = 1."""
    return [ms.values[2 * n] for n in range(1, ms.K // 2 + 1)]


def _upper_half(count: int) -> slice:
    start = count // 2
    if count - start < 2:
        start = max(count - 2, 0)
    return slice(start, count)


def carleman_test(ms: MomentSequence, min_alpha: float = 0.1, exponent_slack: float = 0.05) -> DeterminacyVerdict:
    """Finite-data Carleman check on ``c_n = m_{2n}^{-1/(2n)}``.

    Divergence of ``sum c_n`` is declared when, over the upper half of the
    available range, ``c_n >= alpha / n`` with ``alpha >= min_alpha`` and the
    fitted power-law decay exponent of ``c_n`` does not exceed
    ``1 + exponent_slack``.
    """
    even = _even_moments(ms)
    if any(m < 0 for m in even):
        raise InvalidInputError("negative even moment: the sequence has no representing measure")
    for n, m in enumerate(even, start=1):
        if m == 0.0:
            return DeterminacyVerdict(DETERMINATE, "carleman", (("point_mass_at_zero", 1.0), ("zero_index", 2 * n)))
    if len(even) < 2:
        return DeterminacyVerdict(INCONCLUSIVE, "none", (("insufficient_data", float(len(even))),))

    ns = np.arange(1, len(even) + 1, dtype=float)
    log_c = np.array([-math.log(m) / (2 * n) for n, m in zip(ns, even)])
    c = np.exp(log_c)
    partial = np.cumsum(c)
    up = _upper_half(len(even))
    alpha = float(np.min(ns[up] * c[up]))
    slope, _ = np.polyfit(np.log(ns[up]), log_c[up], 1)
    exponent = -float(slope)

    diagnostics = [(f"c_{int(n)}", v) for n, v in zip(ns, c)]
    diagnostics += [(f"partial_sum_{int(n)}", v) for n, v in zip(ns, partial)]
    diagnostics += [("alpha", alpha), ("decay_exponent", exponent)]
    if alpha >= min_alpha and exponent <= 1.0 + exponent_slack:
        return DeterminacyVerdict(DETERMINATE, "carleman", diagnostics)
    return DeterminacyVerdict(INCONCLUSIVE, "none", diagnostics)


def cramer_test(ms: MomentSequence, max_residual: float = 0.5, max_rate_increase: float = 0.25) -> DeterminacyVerdict:
    """Finite-data check of the growth bound ``m_{2n} <= C R^{2n} (2n)!``.

    ``y_n = log m_{2n} - log (2n)!`` is fitted by least squares against ``2n``
    on the lower and on the upper half of the range. The bound is accepted
    when the fitted rate ``log R`` does not increase from the lower to the
    upper half by more than ``max_rate_increase`` and the last moments stay
    within ``max_residual`` (in log) of the upper-half fit.
    """
    even = _even_moments(ms)
    if any(m < 0 for m in even):
        raise InvalidInputError("negative even moment: the sequence has no representing measure")
    if any(m == 0.0 for m in even):
        # only the zero measure or a point mass at 0 has a vanishing even moment
        return DeterminacyVerdict(DETERMINATE, "cramer", (("point_mass_at_zero", 1.0),))
    if len(even) < 3:
        return DeterminacyVerdict(INCONCLUSIVE, "none", (("insufficient_data", float(len(even))),))

    ns = np.arange(1, len(even) + 1)
    x = 2.0 * ns
    y = np.array([math.log(m) - math.lgamma(2 * n + 1) for n, m in zip(ns, even)])
    split = len(even) // 2
    lower = slice(0, split + 1)
    upper = slice(split, len(even))
    rate_lo, _ = np.polyfit(x[lower], y[lower], 1)
    rate_up, icpt_up = np.polyfit(x[upper], y[upper], 1)
    resid = y[upper] - (rate_up * x[upper] + icpt_up)
    tail = resid[-max(1, len(resid) // 2):]
    tail_excess = float(np.max(tail))

    diagnostics = [
        ("log_R_lower", float(rate_lo)),
        ("log_R_upper", float(rate_up)),
        ("log_C_upper", float(icpt_up)),
        ("tail_residual", tail_excess),
    ]
    if rate_up - rate_lo <= max_rate_increase and tail_excess <= max_residual:
        return DeterminacyVerdict(DETERMINATE, "cramer", diagnostics)
    return DeterminacyVerdict(INCONCLUSIVE, "none", diagnostics)


class _VanishingDensity(Exception):
    pass


def krein_test(
    d: DensitySpec,
    tol: float = TOL_KREIN,
    x0: float = 8.0,
    eps0: float = 1.0,
    max_doublings: int = 64,
) -> DeterminacyVerdict:
    """Evaluate ``int log f(x) / (1 + x^2) dx`` over expanding windows.

    Windows are ``[eps_j, X_j]`` (mirrored for full-line support) with
    ``X_j = x0 * 2^j`` and ``eps_j = eps0 * 2^-j``, so integrable endpoint
    singularities at 0 are approached from outside. For ``half_line`` support
    only ``[0, inf)`` is integrated. The verdict is ``indeterminate`` once a
    window doubling changes the integral by less than ``tol`` relatively.
    """

    def log_weighted(x: float) -> float:
        if d.log_evaluator is not None:
            lv = float(d.log_evaluator(x))
            if math.isnan(lv) or lv == math.inf:
                raise InvalidDensityError(f"log-density value {lv!r} at x={x!r}")
            if lv == -math.inf:
                raise _VanishingDensity(x)
            return lv / (1.0 + x * x)
        v = float(d.evaluator(x))
        if not math.isfinite(v) or v < 0:
            raise InvalidDensityError(f"density value {v!r} at x={x!r} is not finite and nonnegative")
        if v == 0.0:
            raise _VanishingDensity(x)
        return math.log(v) / (1.0 + x * x)

    signs = (1.0,) if d.support == "half_line" else (1.0, -1.0)

    def piece(a: float, b: float) -> float:
        # log-scale substitution x = exp(u) keeps both tails and the origin well resolved
        total = 0.0
        for s in signs:
            val, _ = integrate.quad(lambda u: log_weighted(s * math.exp(u)) * math.exp(u), math.log(a), math.log(b), limit=200, epsabs=0.0, epsrel=1e-12)
            total += val
        return total

    try:
        value = piece(eps0, x0)
        history = [value]
        stabilized = False
        for j in range(1, max_doublings + 1):
            hi, lo = x0 * 2.0**j, eps0 * 2.0**-j
            value = value + piece(hi / 2.0, hi) + piece(lo, lo * 2.0)
            change = abs(value - history[-1]) / max(abs(value), np.finfo(float).tiny)
            history.append(value)
            if change < tol:
                stabilized = True
                break
    except _VanishingDensity as exc:
        return DeterminacyVerdict(INCONCLUSIVE, "none", (("density_vanishes_at", float(exc.args[0])),))

    diagnostics = (
        ("log_integral", history[-1]),
        ("windows", float(len(history))),
        ("last_relative_change", change),
        ("window_radius", x0 * 2.0 ** (len(history) - 1)),
    )
    if stabilized:
        return DeterminacyVerdict(INDETERMINATE, "krein", diagnostics)
    return DeterminacyVerdict(INCONCLUSIVE, "none", diagnostics + (("diverging", 1.0 if history[-1] < history[0] else 0.0),))


def q_power_density(k: int) -> DensitySpec:
    """Density of ``X^k`` for ``X`` with density ``pi^{-1/2} exp(-x^2)``.

    Odd ``k`` gives a full-line density, even ``k`` a density on ``[0, inf)``.
    """
    if k < 1:
        raise InvalidInputError("k must be positive")
    inv = 1.0 / k
    if k % 2:
        pref = 1.0 / (k * math.sqrt(math.pi))

        def log_f(y):
            a = abs(y)
            return math.log(pref) + (inv - 1.0) * math.log(a) - a ** (2.0 * inv)

        return DensitySpec(lambda y: math.exp(log_f(y)), "full_line", f"Q^{k}", log_f)

    pref = 2.0 / (k * math.sqrt(math.pi))

    def log_g(y):
        if y <= 0:
            return -math.inf
        return math.log(pref) + (inv - 1.0) * math.log(y) - y ** (2.0 * inv)

    return DensitySpec(lambda y: math.exp(log_g(y)), "half_line", f"Q^{k}", log_g)


def analyze(ms: MomentSequence, tol_psd: float = TOL_PSD, dps: int = 50) -> dict:
    """Existence plus every applicable determinacy test, as a JSON-ready dict."""
    report = {"kind": ms.kind, "K": ms.K}
    report["hamburger_existence"] = hamburger_existence(ms, tol_psd, dps).to_json()
    if ms.kind == STIELTJES:
        report["stieltjes_existence"] = stieltjes_existence(ms, tol_psd, dps).to_json()
    feasible = report["hamburger_existence"]["feasible"]
    if feasible:
        report["carleman"] = carleman_test(ms).to_json()
        report["cramer"] = cramer_test(ms).to_json()
    verdicts = [report.get("carleman"), report.get("cramer")]
    decided = [v for v in verdicts if v and v["status"] == DETERMINATE]
    report["verdict"] = decided[0] if decided else {"status": INCONCLUSIVE, "criterion": "none", "diagnostics": []}
    return report
