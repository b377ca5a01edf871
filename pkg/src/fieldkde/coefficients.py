"""Coefficient families on the positive orthant of Z^d and their tail functionals.

A coefficient model assigns a weight a_k to every multi-index k >= 0 of Z^d
(zero elsewhere, which makes the driven moving-average field causal).  The
dependence the coefficients induce is summarised by

    A_k     = sqrt( sum_{i >= k} a_i^2 )
    A[n]    = max over axes of A at (n,1,...,1), (1,n,1,...,1), ...
    B_m     = sqrt( sum_{i >= 0, |i|_inf >= m} a_i^2 )
    Delta_n = sum_{k in [1,n]^d} A_{k-1} / prod_t sqrt(k_t)

and the checkers below decide whether a (coefficients, bandwidth, truncation
schedule) combination lies in the regime where the normalised kernel density
estimator of the field's marginal has a Gaussian limit.

Supported families: power decay a_i = c*(1+|i|_inf)^(-q) with q > d/2,
geometric a_i = r^(i_1+...+i_d) with 0 < r < 1, and finite tables.  Radial
sums for the power family are evaluated shell by shell with certified
remainder bounds, so all reported functionals carry an explicit tail error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce

import numpy as np

__all__ = [
    "CoefficientModel",
    "TailFunctionals",
    "ConditionReport",
    "ToleranceError",
    "tail_functionals",
    "coeff_box",
    "coeff_at",
    "box_mass",
    "total_sq_mass",
    "residual_sqrt_mass",
    "pair_weight_sum",
    "pair_weight_sum_truncated",
    "check_decay_window",
    "check_hallin",
    "check_machkouri_qsum",
    "check_condition_c",
    "model_from_config",
]

FAMILIES = ("power_decay", "geometric", "finite_support", "tabulated")


class ToleranceError(RuntimeError):
    """Raised when a tail bound cannot be certified within resource limits."""


@dataclass(frozen=True)
class CoefficientModel:
    """Rule k -> a_k on the positive orthant, plus decay metadata.

    ``beta``/``c1`` optionally declare a bound A[n] <= c1 * n^(-beta); when
    absent, ``decay_exponent`` derives beta from the family (q - d/2 for
    power decay, +inf for geometric and finite tables).
    """

    d: int
    family: str
    q: float | None = None
    scale: float = 1.0
    ratio: float | None = None
    table: np.ndarray | None = None
    beta: float | None = None
    c1: float | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be a positive integer")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown coefficient family {self.family!r}")
        if self.family == "power_decay":
            if self.q is None or self.q <= self.d / 2.0:
                raise ValueError(
                    "power-decay requires q > d/2 for square summability "
                    f"(got q={self.q}, d={self.d})"
                )
            if self.scale == 0:
                raise ValueError("power-decay scale must be nonzero")
        elif self.family == "geometric":
            if self.ratio is None or not (0.0 < self.ratio < 1.0):
                raise ValueError("geometric ratio must lie in (0, 1)")
        else:
            if self.table is None:
                raise ValueError(f"{self.family} model needs a value table")
            tab = np.asarray(self.table, dtype=float)
            if tab.ndim != self.d:
                raise ValueError("table dimensionality must match d")
            if not np.all(np.isfinite(tab)):
                raise ValueError("table values must be finite")
            object.__setattr__(self, "table", tab)
        if self.beta is not None and self.beta <= 0:
            raise ValueError("declared decay exponent must be positive")

    def decay_exponent(self) -> float:
        if self.beta is not None:
            return self.beta
        if self.family == "power_decay":
            return self.q - self.d / 2.0
        return math.inf

    def support_side(self) -> int | None:
        """Side of the smallest cube containing all nonzero a_k, or None."""
        if self.table is None:
            return None
        nz = np.nonzero(self.table)
        if len(nz[0]) == 0:
            return 1
        return int(max(ax.max() for ax in nz)) + 1

    def to_config(self) -> dict:
        cfg = {"family": self.family, "d": self.d}
        if self.family == "power_decay":
            cfg["q"] = self.q
            cfg["scale"] = self.scale
        elif self.family == "geometric":
            cfg["ratio"] = self.ratio
        else:
            cfg["table"] = np.asarray(self.table).tolist()
        if self.beta is not None:
            cfg["beta"] = self.beta
        if self.c1 is not None:
            cfg["c1"] = self.c1
        return cfg

    def label(self) -> str:
        if self.family == "power_decay":
            return f"power_decay(d={self.d},q={self.q},scale={self.scale})"
        if self.family == "geometric":
            return f"geometric(d={self.d},ratio={self.ratio})"
        side = self.support_side()
        return f"{self.family}(d={self.d},side={side})"


def model_from_config(cfg: dict) -> CoefficientModel:
    cfg = dict(cfg)
    family = cfg.pop("family")
    d = int(cfg.pop("d"))
    table = cfg.pop("table", None)
    if table is not None:
        table = np.asarray(table, dtype=float)
    return CoefficientModel(d=d, family=family, table=table, **cfg)


# ---------------------------------------------------------------------------
# evaluation


def coeff_at(model: CoefficientModel, k) -> float:
    """a_k for a single multi-index (zero outside the positive orthant)."""
    k = tuple(int(t) for t in np.atleast_1d(k))
    if len(k) != model.d:
        raise ValueError("index length must match dimension")
    if any(t < 0 for t in k):
        return 0.0
    if model.family == "power_decay":
        return model.scale * float(1 + max(k)) ** (-model.q)
    if model.family == "geometric":
        return model.ratio ** sum(k)
    tab = model.table
    if any(t >= s for t, s in zip(k, tab.shape)):
        return 0.0
    return float(tab[k])


def coeff_box(model: CoefficientModel, side: int) -> np.ndarray:
    """Array of a_k on the cube [0, side)^d."""
    if side < 1:
        raise ValueError("side must be >= 1")
    d = model.d
    if model.family == "power_decay":
        axes = np.ix_(*[np.arange(side)] * d)
        radial = reduce(np.maximum, axes) if d > 1 else axes[0]
        return model.scale * (1.0 + radial) ** (-model.q)
    if model.family == "geometric":
        pows = model.ratio ** np.arange(side, dtype=float)
        return reduce(np.multiply, np.ix_(*[pows] * d)) if d > 1 else pows.copy()
    out = np.zeros((side,) * d)
    tab = model.table
    sl = tuple(slice(0, min(side, s)) for s in tab.shape)
    out[sl] = tab[sl]
    return out


# ---------------------------------------------------------------------------
# radial shell sums for the power family
#
# For a_i = c*(1+|i|_inf)^(-q) and any j inside a cube [0, L)^d, the mass of
# {i >= j} outside the cube is a shell series
#     sum_{s >= L} [prod(s+1-j_t) - prod(s-j_t)] * c^2 (1+s)^(-2q),
# whose bracket is a degree-(d-1) polynomial in s.  With the power moments
# P_r = sum_{s >= L} s^r c^2 (1+s)^(-2q) precomputed, the outside mass is an
# O(1) combination per index, so A-tables are exact up to the certified
# moment remainder.

_SHELL_BLOCK = 1 << 16
_MAX_SHELLS = 1 << 26


def _power_moments(model: CoefficientModel, start: int, target: float):
    """(P_0..P_{d-1}, remainder_bound) for P_r = sum_{s>=start} s^r c^2 (1+s)^(-2q)."""
    d, q2, c2 = model.d, 2.0 * model.q, model.scale**2
    sums = np.zeros(d)
    s0 = start
    rem = math.inf
    while s0 - start < _MAX_SHELLS:
        s = np.arange(s0, s0 + _SHELL_BLOCK, dtype=float)
        w = c2 * (1.0 + s) ** (-q2)
        for r in range(d):
            sums[r] += float(np.sum(s**r * w))
        s0 += _SHELL_BLOCK
        # integral bound on sum_{s >= s0} s^r (1+s)^(-q2), worst at r = d-1
        rem = c2 * float(s0) ** (d - q2) / (q2 - d)
        if rem <= target:
            return sums, rem
    raise ToleranceError(
        f"shell series for q={model.q}, d={d} does not reach tolerance {target:g} "
        f"within {_MAX_SHELLS} shells; relax tol"
    )


def _elementary_coeffs(offsets) -> list[np.ndarray]:
    """Coefficients (ascending in s) of prod_t (s + x_t) over a broadcast grid."""
    coeffs = [np.array(1.0)]
    for x in offsets:
        new = [None] * (len(coeffs) + 1)
        new[0] = x * coeffs[0]
        for r in range(1, len(coeffs)):
            new[r] = coeffs[r - 1] + x * coeffs[r]
        new[len(coeffs)] = coeffs[-1]
        coeffs = [np.asarray(c, dtype=float) for c in new]
    return coeffs


def _power_outside_mass(model: CoefficientModel, grid_side: int, start: int, tol_sq: float):
    """Outside mass sum_{i >= j, |i|_inf >= start} a_i^2 for all j in [0, grid_side)^d.

    Returns (array over the grid, remainder bound on each entry).
    """
    d = model.d
    # weights |coeff_r| <= C(d, r) * start^(d-r); budget the moment remainder so the
    # propagated error stays below tol_sq
    wmax = sum(math.comb(d, r) * max(start, 1) ** (d - r) for r in range(d))
    P, rem = _power_moments(model, start, tol_sq / (2.0 * max(wmax, 1)))
    j_axes = [np.arange(grid_side, dtype=float).reshape([-1 if t == ax else 1 for t in range(d)])
              for ax in range(d)]
    plus = _elementary_coeffs([1.0 - j for j in j_axes])
    minus = _elementary_coeffs([-j for j in j_axes])
    out = np.zeros((grid_side,) * d)
    for r in range(d):
        out = out + (plus[r] - minus[r]) * P[r]
    return out, rem * wmax


def _power_residual_mass(model: CoefficientModel, m: int, tol_sq: float = 1e-24):
    """sum_{i >= 0, |i|_inf >= m} a_i^2 with certified remainder."""
    d = model.d
    wmax = sum(math.comb(d, r) for r in range(d))
    P, rem = _power_moments(model, m, tol_sq / max(wmax, 1))
    val = sum(math.comb(d, r) * P[r] for r in range(d))
    return float(val), rem * wmax


# ---------------------------------------------------------------------------
# scalar mass helpers


def total_sq_mass(model: CoefficientModel) -> float:
    """sum_{k >= 0} a_k^2."""
    if model.family == "power_decay":
        return _power_residual_mass(model, 0)[0]
    if model.family == "geometric":
        return (1.0 - model.ratio**2) ** (-model.d)
    return float(np.sum(model.table**2))


def box_mass(model: CoefficientModel, m: int) -> float:
    """sum_{k in [0, m)^d} a_k^2."""
    if m < 1:
        return 0.0
    if model.family == "geometric":
        r2 = model.ratio**2
        return float(((1.0 - r2**m) / (1.0 - r2)) ** model.d)
    if model.family == "power_decay":
        return float(np.sum(coeff_box(model, m) ** 2))
    tab = model.table
    sl = tuple(slice(0, min(m, s)) for s in tab.shape)
    return float(np.sum(tab[sl] ** 2))


def residual_sqrt_mass(model: CoefficientModel, m: int) -> float:
    """B_m = sqrt( sum over i >= 0 with |i|_inf >= m of a_i^2 )."""
    if m < 1:
        return math.sqrt(total_sq_mass(model))
    if model.family == "geometric":
        r2 = model.ratio**2
        val = (1.0 - (1.0 - r2**m) ** model.d) / (1.0 - r2) ** model.d
        return math.sqrt(max(val, 0.0))
    if model.family == "power_decay":
        return math.sqrt(_power_residual_mass(model, m)[0])
    return math.sqrt(max(total_sq_mass(model) - box_mass(model, m), 0.0))


def pair_weight_sum(model: CoefficientModel, lag, tol: float = 1e-12) -> float:
    """sum_k a_k a_{k+lag}, the lag covariance contribution of the weights."""
    lag = tuple(int(t) for t in np.atleast_1d(lag))
    if len(lag) != model.d:
        raise ValueError("lag length must match dimension")
    if model.family == "geometric":
        r = model.ratio
        return r ** sum(abs(t) for t in lag) * (1.0 - r**2) ** (-model.d)
    if model.family == "power_decay":
        total = math.sqrt(total_sq_mass(model))
        side = 64
        prev = None
        while True:
            val = _pair_sum_box(model, lag, side)
            tail = residual_sqrt_mass(model, max(side - max(abs(t) for t in lag) - 1, 1)) * total
            if tail <= tol or (prev is not None and abs(val - prev) <= tol):
                return val
            if side > 1 << 14:
                raise ToleranceError("pair sum truncation did not certify; relax tol")
            prev, side = val, side * 2
    side = max(model.table.shape) + max(abs(t) for t in lag) + 1
    return _pair_sum_box(model, lag, side)


def _pair_sum_box(model: CoefficientModel, lag, side: int) -> float:
    a = coeff_box(model, side + max(max(abs(t) for t in lag), 0))
    lead = tuple(slice(max(-t, 0), max(-t, 0) + side) for t in lag)
    shift = tuple(slice(max(t, 0), max(t, 0) + side) for t in lag)
    return float(np.sum(a[lead] * a[shift]))


def pair_weight_sum_truncated(model: CoefficientModel, lag, m: int) -> float:
    """sum over k with both k and k+lag inside [0, m)^d of a_k a_{k+lag}."""
    lag = tuple(int(t) for t in np.atleast_1d(lag))
    a = coeff_box(model, m)
    if any(abs(t) >= m for t in lag):
        return 0.0
    lead = tuple(slice(max(-t, 0), m - max(t, 0)) for t in lag)
    shift = tuple(slice(max(t, 0), m - max(-t, 0)) for t in lag)
    return float(np.sum(a[lead] * a[shift]))


# ---------------------------------------------------------------------------
# tail functionals


@dataclass(frozen=True)
class TailFunctionals:
    """A-table, A[n], B_m and Delta_n for one model at one (n, m).

    ``a_values[j]`` holds A_j on [0, L)^d with L = ``table_side``; entries are
    exact for finite tables and carry a certified absolute ``tail_error``
    otherwise.  ``delta_tail_error`` is the propagated bound for Delta_n.
    """

    d: int
    n: int
    m: int
    a_values: np.ndarray
    a_bracket_n: float
    b_m: float
    delta_n: float
    total_sq: float
    table_side: int
    tail_error: float
    delta_tail_error: float

    def a_at(self, k) -> float:
        """A_k for any integer multi-index (coordinates below 0 clamp to 0)."""
        k = tuple(max(int(t), 0) for t in np.atleast_1d(k))
        if len(k) != self.d:
            raise ValueError("index length must match dimension")
        if all(t < self.table_side for t in k):
            return float(self.a_values[k])
        return 0.0

    def summary(self) -> dict:
        return {
            "d": self.d,
            "n": self.n,
            "m": self.m,
            "a_bracket_n": self.a_bracket_n,
            "b_m": self.b_m,
            "delta_n": self.delta_n,
            "total_sq": self.total_sq,
            "table_side": self.table_side,
            "tail_error": self.tail_error,
            "delta_tail_error": self.delta_tail_error,
        }


def _suffix_box_sums(arr: np.ndarray) -> np.ndarray:
    """S[j] = sum_{i >= j within the array} arr[i]."""
    out = arr
    for ax in range(arr.ndim):
        out = np.flip(np.cumsum(np.flip(out, ax), axis=ax), ax)
    return out


def _delta_weights(n: int, d: int) -> np.ndarray:
    w = 1.0 / np.sqrt(np.arange(1, n + 1, dtype=float))
    return reduce(np.multiply, np.ix_(*[w] * d)) if d > 1 else w


def tail_functionals(
    model: CoefficientModel,
    n: int,
    m: int,
    tol: float = 1e-10,
    max_table_bytes: int = 1 << 28,
) -> TailFunctionals:
    """Compute A-table, A[n], B_m and Delta_n.

    The A-table covers [0, max(n, m) + 1)^d, which is everything Delta_n and
    A[n] consume.  For the power family the infinite orthant tails are folded
    in through shell moments with remainder <= tol^2 in squared units, i.e.
    at most ``tol`` on each reported A value; the Delta_n bound is that error
    times the summed weights and is reported separately.

    Raises ``ToleranceError`` when the certification cannot be met and
    ``ValueError`` for n, m < 1 or non-square-summable models.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    d = model.d
    L = max(n + 1, m + 1)
    if model.family not in ("power_decay", "geometric"):
        L = max(L, model.support_side())
    if (L**d) * 8 > max_table_bytes:
        raise ToleranceError(
            f"A-table of side {L}^{d} exceeds the {max_table_bytes} byte cap"
        )

    tail_err = 0.0
    if model.family == "geometric":
        r = model.ratio
        factor = (1.0 - r * r) ** (-d / 2.0)
        pows = r ** np.arange(L, dtype=float)
        radial = reduce(np.multiply, np.ix_(*[pows] * d)) if d > 1 else pows.copy()
        a_table = factor * radial
        total = (1.0 - r * r) ** (-d)
        b_m = residual_sqrt_mass(model, m)
        kk = np.arange(1, n + 1, dtype=float)
        delta = factor * float(np.sum(r ** (kk - 1.0) / np.sqrt(kk))) ** d
    else:
        a2 = coeff_box(model, L) ** 2
        sq = _suffix_box_sums(a2)
        if model.family == "power_decay":
            outside, rem = _power_outside_mass(model, L, L, tol**2)
            sq = sq + outside
            tail_err = math.sqrt(rem)
            total, _ = _power_residual_mass(model, 0)
            b_m = residual_sqrt_mass(model, m)
        else:
            total = float(np.sum(a2))
            b_m = math.sqrt(max(total - box_mass(model, m), 0.0))
        a_table = np.sqrt(np.maximum(sq, 0.0))
        w = _delta_weights(n, d)
        delta = float(np.sum(a_table[(slice(0, n),) * d] * w))

    if tail_err > tol:
        raise ToleranceError(
            f"certified tail error {tail_err:g} exceeds tol {tol:g}"
        )
    weight_mass = float(np.sum(_delta_weights(n, 1))) ** d
    idx = [tuple(n if t == ax else 1 for t in range(d)) for ax in range(d)]
    bracket = max(float(a_table[i]) for i in idx)
    return TailFunctionals(
        d=d,
        n=n,
        m=m,
        a_values=a_table,
        a_bracket_n=bracket,
        b_m=b_m,
        delta_n=delta,
        total_sq=total,
        table_side=L,
        tail_error=tail_err,
        delta_tail_error=tail_err * weight_mass,
    )


# ---------------------------------------------------------------------------
# condition checkers


@dataclass
class ConditionReport:
    """Outcome of one deterministic or trend-based regime check."""

    name: str
    passed: bool
    verdict: str
    details: dict = field(default_factory=dict)
    delta_interval: tuple[float, float] | None = None
    delta_star: float | None = None
    thresholds: dict = field(default_factory=dict)
    grid_rows: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "verdict": self.verdict,
            "details": self.details,
            "delta_interval": list(self.delta_interval) if self.delta_interval else None,
            "delta_star": self.delta_star,
            "thresholds": self.thresholds,
            "grid_rows": self.grid_rows,
        }


def _exact(x) -> Fraction:
    # Fraction(float) is exact (floats are binary rationals), so strict
    # comparisons below are decided without rounding
    return Fraction(x)


def check_decay_window(d: int, beta: float, gamma: float) -> ConditionReport:
    """Feasibility of a power-law decay/bandwidth pair.

    With A[n] <= c1 * n^(-beta) and b_n = c2 * n^(-gamma), the truncation
    schedule m_n = floor(n^delta) works for every delta in the open interval
    (gamma/beta, min(gamma/d, 1 - gamma/d)); the pair passes iff
    gamma < d*beta/(d+beta) and beta > d, both strict.
    """
    if d < 1 or gamma <= 0 or beta <= 0:
        raise ValueError("d, beta, gamma must be positive")
    fd, fg = _exact(d), _exact(gamma)
    if math.isinf(beta):
        beta_ok = True
        gamma_ok = fg < fd
        lo = Fraction(0)
    else:
        fb = _exact(beta)
        beta_ok = fb > fd
        gamma_ok = fg < fd * fb / (fd + fb)
        lo = fg / fb
    hi = min(fg / fd, 1 - fg / fd)
    passed = bool(beta_ok and gamma_ok)
    star = float(lo + hi) / 2.0 if passed else None
    return ConditionReport(
        name="decay_window",
        passed=passed,
        verdict="pass" if passed else "fail",
        details={
            "beta_gt_d": bool(beta_ok),
            "gamma_below_threshold": bool(gamma_ok),
            "gamma_threshold": float(fd * _exact(beta) / (fd + _exact(beta)))
            if not math.isinf(beta)
            else float(d),
            "interval_lo": float(lo),
            "interval_hi": float(hi),
        },
        delta_interval=(float(lo), float(hi)) if passed else None,
        delta_star=star,
    )


def check_hallin(d: int, q: float, gamma: float) -> ConditionReport:
    """Hallin-style sufficient condition for |a_i| <= C |i|_inf^(-q), b_n = n^(-gamma).

    That route needs q > max(d+3, 2d+1/2) together with
    d - gamma*(2q-1+6d)/(2q-1-4d) > 0.  The report also evaluates the weaker
    window route obtained by taking beta = q - d/2, i.e. q > 3d/2 with
    gamma < d*(q-d/2)/(q+d/2), so callers can compare the two regimes.
    """
    if d < 1 or q <= 0 or gamma <= 0:
        raise ValueError("d, q, gamma must be positive")
    fd, fq, fg = _exact(d), _exact(q), _exact(gamma)
    window_q_ok = fq > 3 * fd / 2
    window_gamma_bound = fd * (fq - fd / 2) / (fq + fd / 2)
    window_ok = bool(window_q_ok and fg < window_gamma_bound)
    denom = 2 * fq - 1 - 4 * fd
    q_ok = fq > max(fd + 3, 2 * fd + Fraction(1, 2))
    details = {
        "hallin_q_ok": bool(q_ok),
        "window_pass": window_ok,
        "window_q_ok": bool(window_q_ok),
        "window_gamma_bound": float(window_gamma_bound),
    }
    if denom <= 0:
        details["exponent_defined"] = False
        return ConditionReport(
            name="hallin",
            passed=False,
            verdict="fail",
            details={**details, "reason": "2q-1-4d <= 0: bandwidth exponent undefined"},
        )
    ratio = (2 * fq - 1 + 6 * fd) / denom
    bw_ok = fd - fg * ratio > 0
    details.update(
        exponent_defined=True,
        exponent_ratio=float(ratio),
        hallin_bandwidth_ok=bool(bw_ok),
        hallin_gamma_bound=float(fd / ratio),
    )
    passed = bool(q_ok and bw_ok)
    return ConditionReport(
        name="hallin", passed=passed, verdict="pass" if passed else "fail", details=details
    )


def check_machkouri_qsum(
    model: CoefficientModel,
    q: float,
    radius: int,
    increment_tol: float = 1e-12,
) -> ConditionReport:
    """Numerical Cauchy check of sum_{i >= 0} |i|_inf^q |a_i| on dyadic boxes.

    Pass when the last dyadic increment is below ``increment_tol`` (always
    true for finite tables), fail when the increments grow, inconclusive
    otherwise.  The convergent q = 5d/2 benchmark and the weaker q > d regime
    are reported for comparison.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    radii = []
    r = 1
    while r < radius:
        radii.append(r)
        r *= 2
    radii.append(radius)
    partial = []
    for r in radii:
        a = np.abs(coeff_box(model, r + 1))
        axes = np.ix_(*[np.arange(r + 1)] * model.d)
        radial = reduce(np.maximum, axes) if model.d > 1 else axes[0]
        partial.append(float(np.sum(radial.astype(float) ** q * a)))
    inc = [b - a for a, b in zip(partial, partial[1:])]
    if not inc:
        inc = [0.0]
    if inc[-1] <= increment_tol:
        verdict, passed = "pass", True
    elif len(inc) >= 3 and inc[-1] >= inc[-2] >= inc[-3]:
        verdict, passed = "fail", False
    else:
        verdict, passed = "inconclusive", False
    return ConditionReport(
        name="qsum",
        passed=passed,
        verdict=verdict,
        details={
            "q": q,
            "elm_benchmark_q": 2.5 * model.d,
            "weaker_regime_q_gt_d": bool(q > model.d),
            "radii": radii,
            "partial_sums": partial,
            "increments": inc,
        },
        thresholds={"increment_tol": increment_tol},
    )


def _seq_verdict(values, strict_ratio: float, trend_ratio: float) -> dict:
    vals = [float(v) for v in values]
    half = len(vals) // 2
    tail = vals[half:] if len(vals) > 1 else vals
    nonincreasing = all(b <= a for a, b in zip(tail, tail[1:]))
    shrinks = vals[-1] < tail[0] or vals[-1] == 0.0
    first = vals[0]
    below_strict = vals[-1] <= strict_ratio * first if first > 0 else vals[-1] == 0.0
    below_trend = vals[-1] <= trend_ratio * first if first > 0 else vals[-1] == 0.0
    if nonincreasing and shrinks and below_strict:
        verdict = "pass"
    elif nonincreasing and shrinks and below_trend:
        verdict = "pass (trend)"
    else:
        verdict = "fail"
    return {
        "values": vals,
        "decreasing_last_half": bool(nonincreasing and shrinks),
        "final_over_initial": vals[-1] / first if first > 0 else 0.0,
        "verdict": verdict,
    }


def check_condition_c(
    model: CoefficientModel,
    bandwidth,
    delta: float,
    n_grid,
    tol: float = 1e-10,
    strict_ratio: float = 0.1,
    trend_ratio: float = 1.0,
) -> ConditionReport:
    """Evaluate the four vanishing-limit sequences for the schedule m_n = floor(n^delta).

    The sequences are sqrt(b_n)*Delta_n, B_{m_n}/b_n, m_n^d*b_n and
    m_n^d*log(n)^d/(n^d*b_n).  Limits cannot be decided on a finite grid, so
    the verdict combines two routes: a theorem-backed "pass (window)" when
    the model's decay exponent puts delta strictly inside the feasible
    interval of ``check_decay_window``, and a numeric "pass (trend)" when all
    four sequences decrease over the last half of the grid and end below
    ``trend_ratio`` times their initial value (``strict_ratio`` marks the
    stricter per-sequence "pass").  Raw sequences are always attached.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    n_grid = [int(n) for n in n_grid]
    if len(n_grid) < 3 or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid must be strictly increasing with length >= 3")
    d = model.d
    gamma = bandwidth.gamma
    rows = []
    seqs = {k: [] for k in ("sqrt_b_delta", "residual_over_b", "m_vol_times_b", "m_logs_over_nb")}
    for n in n_grid:
        m_n = max(1, math.floor(n**delta))
        f = tail_functionals(model, n, m_n, tol=tol)
        b = bandwidth.b(n)
        c1v = math.sqrt(b) * f.delta_n
        c2v = f.b_m / b
        c3v = (m_n**d) * b
        c4v = (m_n**d) * math.log(n) ** d / ((float(n) ** d) * b)
        seqs["sqrt_b_delta"].append(c1v)
        seqs["residual_over_b"].append(c2v)
        seqs["m_vol_times_b"].append(c3v)
        seqs["m_logs_over_nb"].append(c4v)
        rows.append(
            {
                "n": n,
                "m_n": m_n,
                "b_n": b,
                "sqrt_b_delta": c1v,
                "residual_over_b": c2v,
                "m_vol_times_b": c3v,
                "m_logs_over_nb": c4v,
            }
        )
    per_seq = {k: _seq_verdict(v, strict_ratio, trend_ratio) for k, v in seqs.items()}
    trend_pass = all(v["verdict"] != "fail" for v in per_seq.values())

    beta_eff = model.decay_exponent()
    window = check_decay_window(d, beta_eff, gamma)
    in_window = False
    if window.passed:
        lo, hi = window.delta_interval
        in_window = lo < delta < hi
    if in_window:
        verdict, passed = "pass (window)", True
    elif trend_pass:
        verdict, passed = "pass (trend)", True
    else:
        verdict, passed = "fail", False
    return ConditionReport(
        name="schedule_limits",
        passed=passed,
        verdict=verdict,
        details={
            "delta": delta,
            "gamma": gamma,
            "beta": beta_eff if not math.isinf(beta_eff) else "inf",
            "window_pass": window.passed,
            "delta_in_window": in_window,
            "sequences": per_seq,
        },
        delta_interval=window.delta_interval,
        delta_star=window.delta_star,
        thresholds={"strict_ratio": strict_ratio, "trend_ratio": trend_ratio},
        grid_rows=rows,
    )
