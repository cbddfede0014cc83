"""Backward induction for the optimal per-period investment fractions.

The prospect value of following an optimal fraction policy from period t on is
a_coef * W**alpha for non-negative wealth and -b_coef * (-W)**alpha for
negative wealth. The last period reduces to a corner problem in the prospect
values of unit long/short positions; every earlier period maximizes a plain
expectation over next-period outcomes,

    g(z) = E[ a_next * q**alpha        on {q >= 0}
            - b_next * (-q)**alpha     on {q < 0} ],    q = 1 + r + y*z,

over the admissible fraction interval (and the mirrored objective over the
mirrored interval for negative wealth). Probability distortions act only
through the terminal statistics, so the inner expectations need no Choquet
machinery.

Maximization uses a uniform grid scan followed by golden-section refinement:
the glued power branches make the objective non-concave around the ruin kink,
so a global scan must precede any local polish. Expectations share one fixed
node set across all z, keeping the objective smooth in z.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .choquet import cpt_cdf, cpt_discrete
from .dist import DiscreteEmpirical, Distribution, RateModel, as_schedule
from .errors import NumericalError
from .prefs import CptPreferences

__all__ = [
    "Constraints",
    "TerminalStats",
    "PolicyCoefficients",
    "PolicyTable",
    "SolverSettings",
    "terminal_stats",
    "terminal_coefficients",
    "recursion_step",
    "backward_induction",
    "optimal_trade",
]

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0

CSV_HEADER = "t,A_t,B_t,kStar,kHatStar"


@dataclass(frozen=True)
class Constraints:
    """Admissible fraction interval: lo_frac*|W| <= trade <= hi_frac*|W|."""

    lo_frac: float
    hi_frac: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.lo_frac) and np.isfinite(self.hi_frac)):
            raise ValueError("fraction bounds must be finite")
        if not self.lo_frac <= 0.0 < self.hi_frac:
            raise ValueError(
                f"fraction bounds must satisfy lo_frac <= 0 < hi_frac, "
                f"got [{self.lo_frac}, {self.hi_frac}]"
            )


@dataclass(frozen=True)
class TerminalStats:
    """Prospect values of unit long and unit short positions in the return."""

    long_value: float
    short_value: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.long_value) and np.isfinite(self.short_value)):
            raise ValueError("terminal statistics must be finite")


@dataclass(frozen=True)
class PolicyCoefficients:
    """One period's value coefficients and optimal fractions.

    a_coef scales W**alpha on non-negative wealth, b_coef scales -(-W)**alpha
    on negative wealth; k_star and k_hat_star are the matching argmax
    fractions.
    """

    t: int
    a_coef: float
    b_coef: float
    k_star: float
    k_hat_star: float

    def __post_init__(self) -> None:
        if self.t < 0:
            raise ValueError(f"period index must be >= 0, got {self.t}")
        vals = (self.a_coef, self.b_coef, self.k_star, self.k_hat_star)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("policy coefficients must be finite")
        if self.a_coef < 0.0:
            raise ValueError(f"a_coef must be >= 0, got {self.a_coef}")
        if self.b_coef > 0.0:
            raise ValueError(f"b_coef must be <= 0, got {self.b_coef}")


@dataclass(frozen=True)
class SolverSettings:
    """Numerical knobs for the per-period maximizations and expectations."""

    grid_points: int = 1001
    z_tol: float = 1e-6
    y_nodes: int = 64
    r_nodes: int = 16
    cdf_tol: float = 1e-9
    refine: bool = True

    def __post_init__(self) -> None:
        if self.grid_points < 2:
            raise ValueError(f"grid_points must be >= 2, got {self.grid_points}")
        if not self.z_tol > 0.0:
            raise ValueError(f"z_tol must be > 0, got {self.z_tol}")
        if self.y_nodes < 1 or self.r_nodes < 1:
            raise ValueError("node counts must be >= 1")
        if not self.cdf_tol > 0.0:
            raise ValueError(f"cdf_tol must be > 0, got {self.cdf_tol}")


@dataclass(frozen=True)
class PolicyTable:
    """Coefficients for periods 0..T-1 plus the inputs that produced them."""

    rows: tuple[PolicyCoefficients, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.rows:
            raise ValueError("policy table must contain at least one row")
        for t, row in enumerate(self.rows):
            if row.t != t:
                raise ValueError(f"rows must cover periods 0..T-1 contiguously, row {t} has t={row.t}")

    @property
    def horizon(self) -> int:
        return len(self.rows)

    def row(self, t: int) -> PolicyCoefficients:
        return self.rows[t]

    def to_csv(self, fh) -> None:
        """Write the table in the fixed schema t,A_t,B_t,kStar,kHatStar."""
        fh.write(CSV_HEADER + "\n")
        for row in self.rows:
            fh.write(
                f"{row.t},{row.a_coef:.17g},{row.b_coef:.17g},"
                f"{row.k_star:.17g},{row.k_hat_star:.17g}\n"
            )


def terminal_stats(
    prefs: CptPreferences, y_dist: Distribution, tol: float = 1e-9
) -> TerminalStats:
    """Prospect values of the unit long and unit short terminal positions."""
    if isinstance(y_dist, DiscreteEmpirical):
        long_v = cpt_discrete(prefs, y_dist).value
        short_v = cpt_discrete(prefs, y_dist.negate()).value
    else:
        long_v = cpt_cdf(prefs, y_dist, tol).value
        short_v = cpt_cdf(prefs, y_dist.negate(), tol).value
    return TerminalStats(long_v, short_v)


def _pick_corner(candidates: list[tuple[float, float]]) -> tuple[float, float]:
    # Smallest |z| wins exact ties: least exposure, deterministic output.
    best = None
    for z, val in sorted(candidates, key=lambda c: (abs(c[0]), c[0])):
        if best is None or val > best[1]:
            best = (z, val)
    return best


def terminal_coefficients(
    prefs: CptPreferences,
    constraints: Constraints,
    stats: TerminalStats,
    t: int = 0,
) -> PolicyCoefficients:
    """Last-period coefficients by corner enumeration.

    On each side of zero the objective is a monotone power function of the
    fraction, so the maximizer over the admissible interval lies at an
    endpoint or at zero; no search is needed.
    """
    a = prefs.alpha
    lo, hi = constraints.lo_frac, constraints.hi_frac
    k, h = stats.long_value, stats.short_value

    g_cands = [(0.0, 0.0), (hi, hi**a * k)]
    l_cands = [(0.0, 0.0), (-hi, hi**a * k)]
    if lo < 0.0:
        g_cands.append((lo, (-lo) ** a * h))
        l_cands.append((-lo, (-lo) ** a * h))

    k_star, a_coef = _pick_corner(g_cands)
    k_hat_star, l_max = _pick_corner(l_cands)
    return PolicyCoefficients(t, a_coef, -l_max + 0.0, k_star, k_hat_star)


def _grid_then_golden(
    f_batch: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    settings: SolverSettings,
) -> tuple[float, float]:
    """Maximize f on [lo, hi]: global grid scan, then local golden refinement.

    Near-equal grid maxima (within z_tol in value) are tie-broken toward the
    smallest |z|. Refinement is accepted only when it strictly improves.
    """
    zs = np.linspace(lo, hi, settings.grid_points)
    vals = f_batch(zs)
    near = np.nonzero(vals >= vals.max() - settings.z_tol)[0]
    i = near[np.lexsort((zs[near], np.abs(zs[near])))[0]]
    z_best, v_best = float(zs[i]), float(vals[i])

    if settings.refine and hi > lo:
        bl = float(zs[max(i - 1, 0)])
        bh = float(zs[min(i + 1, len(zs) - 1)])
        z_ref, v_ref = _golden_max(
            lambda z: float(f_batch(np.array([z]))[0]), bl, bh, settings.z_tol
        )
        if v_ref > v_best:
            z_best, v_best = z_ref, v_ref
    return z_best, v_best


def _golden_max(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    if hi - lo <= tol:
        mid = 0.5 * (lo + hi)
        return mid, f(mid)
    c = hi - _INVPHI * (hi - lo)
    d = lo + _INVPHI * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - _INVPHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INVPHI * (hi - lo)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def recursion_step(
    prefs: CptPreferences,
    constraints: Constraints,
    nxt: PolicyCoefficients,
    rate_model: RateModel,
    y_dist: Distribution,
    settings: SolverSettings | None = None,
) -> PolicyCoefficients:
    """Roll the value coefficients back one period from the period-(t+1) row.

    The expectation marginalizes jointly over the excess return and, for
    random rate models, the period-t rate, on one fixed tensor node grid
    shared across every candidate fraction z. The ruin region 1 + r + y*z < 0
    enters exactly through the indicator split, with no wealth clipping.
    """
    if nxt.t < 1:
        raise ValueError("next row must belong to period t >= 1")
    settings = settings or SolverSettings()
    t = nxt.t - 1
    a = prefs.alpha

    yv, yw = y_dist.expectation_nodes(settings.y_nodes)
    rv, rw = rate_model.nodes(t, settings.r_nodes)
    rr = np.repeat(rv, yv.size)
    yy = np.tile(yv, rv.size)
    ww = np.outer(rw, yw).ravel()
    a_next, b_next = nxt.a_coef, nxt.b_coef

    def mix_batch(zs: np.ndarray, c_pos: float, c_neg: float) -> np.ndarray:
        q = 1.0 + rr[None, :] + np.outer(zs, yy)
        contrib = c_pos * np.maximum(q, 0.0) ** a + c_neg * np.maximum(-q, 0.0) ** a
        return contrib @ ww

    def g_batch(zs: np.ndarray) -> np.ndarray:
        return mix_batch(zs, a_next, -b_next)

    def l_batch(zs: np.ndarray) -> np.ndarray:
        return mix_batch(zs, -b_next, a_next)

    k_star, a_coef = _grid_then_golden(
        g_batch, constraints.lo_frac, constraints.hi_frac, settings
    )
    k_hat_star, l_max = _grid_then_golden(
        l_batch, -constraints.hi_frac, -constraints.lo_frac, settings
    )
    return PolicyCoefficients(t, a_coef, -l_max + 0.0, k_star, k_hat_star)


def backward_induction(
    prefs: CptPreferences,
    constraints: Constraints,
    rate_model: RateModel,
    y_dist,
    horizon: int,
    settings: SolverSettings | None = None,
) -> PolicyTable:
    """Solve all periods 0..horizon-1, last period first.

    ``y_dist`` is a single distribution (stationary i.i.d. returns) or a
    per-period sequence whose entry t governs the return over [t, t+1).
    The output is deterministic in the inputs: rows depend only on the period
    index and the models, never on the time the table is queried from.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    settings = settings or SolverSettings()
    schedule = as_schedule(y_dist, horizon)

    try:
        stats = terminal_stats(prefs, schedule[-1], settings.cdf_tol)
    except NumericalError as exc:
        raise NumericalError(f"terminal period {horizon - 1}: {exc}") from exc

    rows = [terminal_coefficients(prefs, constraints, stats, t=horizon - 1)]
    for t in range(horizon - 2, -1, -1):
        try:
            rows.append(
                recursion_step(prefs, constraints, rows[-1], rate_model, schedule[t], settings)
            )
        except NumericalError as exc:
            raise NumericalError(f"period {t}: {exc}") from exc

    meta = {
        "prefs": repr(prefs),
        "constraints": repr(constraints),
        "rate_model": repr(rate_model),
        "y_dist": repr(y_dist),
        "settings": repr(settings),
        "horizon": str(horizon),
    }
    return PolicyTable(tuple(reversed(rows)), meta)


def optimal_trade(row: PolicyCoefficients, wealth: float) -> float:
    """Dollar trade prescribed by a policy row at the given wealth level."""
    if not np.isfinite(wealth):
        raise ValueError(f"wealth must be finite, got {wealth!r}")
    frac = row.k_star if wealth >= 0.0 else row.k_hat_star
    return frac * wealth
