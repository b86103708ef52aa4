"""First-moment computations for non-trivial cores of random 3-CNF formulas.

Finite-n quantities take a :class:`MomentParams` (core size ``s`` and the role
counts ``t``, ``u``, ``v``); asymptotic ones take an :class:`AsymptoticParams`
with ``s = a n`` and ``t = b n``.  Everything is computed as a natural logarithm
using log-gamma binomials.
"""
from __future__ import annotations

import importlib.util
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln, xlogy

from .errors import ExternalFormulaRequired, ParameterError


def log_comb(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def _c2(k):
    return k * (k - 1) / 2


def _c3(k):
    return k * (k - 1) * (k - 2) / 6


@dataclass(frozen=True)
class MomentParams:
    n: int
    s: int
    t: int
    u: int = 0
    v: int = 0
    p: float = 0.0
    rho: float = 0.5

    def __post_init__(self):
        if self.s < 0 or not 0 <= self.v <= self.u <= self.t <= self.n - self.s:
            raise ParameterError(
                f"need 0 <= v <= u <= t <= n - s and s >= 0, got n={self.n} s={self.s} "
                f"t={self.t} u={self.u} v={self.v}")
        if not 0.0 <= self.p <= 1.0:
            raise ParameterError(f"p = {self.p} outside [0, 1]")
        if not 0.0 <= self.rho <= 1.0:
            raise ParameterError(f"rho = {self.rho} outside [0, 1]")

    @property
    def starred(self) -> int:
        return self.n - self.s - self.t


def clause_census(mp: MomentParams) -> dict[str, int]:
    """Clause counts per category; the ``*_each`` entries are per constrained variable."""
    n, s, t, u, v = mp.n, mp.s, mp.t, mp.u, mp.v
    pair = math.comb(t, 2) + s * t
    return {
        "type1_three_core": math.comb(s, 3),
        "type1_two_core": 2 * (n - s) * math.comb(s, 2),
        "type2_each": math.comb(s, 2),
        "type3_free_triple": math.comb(t, 3) + s * math.comb(t, 2),
        "type3_free_pair_star": 2 * (n - s - t) * pair,
        "type3_starrable": u * pair,
        "type3_invertible_star": 2 * (n - s - t) * v * (s + t),
        "type3_nonstarrable_each": pair,
        "type3_noninvertible_each": 2 * (n - s - t) * (s + t),
    }


def forbidden_exponent(mp: MomentParams) -> int:
    c = clause_census(mp)
    return (c["type3_free_triple"] + c["type3_free_pair_star"]
            + c["type3_starrable"] + c["type3_invertible_star"])


def _log_none(count, p: float) -> float:
    """ln((1 - p)**count), with 0**0 = 1."""
    if count == 0:
        return 0.0
    if p == 1.0:
        return -math.inf
    return count * math.log1p(-p)


def _log_some(count, p: float) -> float:
    """ln(1 - (1 - p)**count)."""
    if count == 0 or p == 0.0:
        return -math.inf
    if p == 1.0:
        return 0.0
    return math.log(-math.expm1(count * math.log1p(-p)))


def _times(k, logx: float) -> float:
    return 0.0 if k == 0 else k * logx


def log_q_factor(mp: MomentParams) -> float:
    c = clause_census(mp)
    return (_log_none(forbidden_exponent(mp), mp.p)
            + _times(mp.t - mp.u, _log_some(c["type3_nonstarrable_each"], mp.p))
            + _times(mp.u - mp.v, _log_some(c["type3_noninvertible_each"], mp.p)))


def q_factor(mp: MomentParams) -> float:
    return math.exp(log_q_factor(mp))


def log_ez_t(mp: MomentParams) -> float:
    """Natural log of the closed-form first moment; ``u`` and ``v`` are ignored."""
    n, s, t, p, rho = mp.n, mp.s, mp.t, mp.p, mp.rho
    star = n - s - t
    pair = _c2(t) + s * t
    head = (_times(star, math.log(rho) if rho > 0 else -math.inf)
            + float(log_comb(n - s, t)) + t * math.log(2)
            + _log_none(_c3(t) + s * _c2(t) + 2 * star * pair, p))
    if t == 0:
        return head
    # 1 - x (rho + (1 - rho) y / 2) rewritten as a sum of nonnegative terms
    log_x = _log_none(pair, p)
    x = math.exp(log_x)
    y = math.exp(_log_none(2 * star * (s + t), p))
    inner = -math.expm1(log_x) + x * (1 - rho) * (1 - y / 2)
    return head + (t * math.log(inner) if inner > 0 else -math.inf)


def ez_t(mp: MomentParams) -> float:
    return math.exp(log_ez_t(mp))


def log_ez_t_unfolded(mp: MomentParams) -> float:
    """ln of the double sum over (u, v) of binomial-weighted Q, before any folding."""
    n, s, t, p, rho = mp.n, mp.s, mp.t, mp.p, mp.rho
    terms = []
    for u in range(t + 1):
        for v in range(u + 1):
            log_q = log_q_factor(MomentParams(n, s, t, u, v, p, rho))
            terms.append(_times(u, math.log(1 - rho) if rho < 1 else -math.inf)
                         + math.log(math.comb(t, u)) - v * math.log(2)
                         + math.log(math.comb(u, v)) + log_q)
    top = max(terms)
    if top == -math.inf:
        return -math.inf
    total = top + math.log(math.fsum(math.exp(x - top) for x in terms))
    return (_times(n - s - t, math.log(rho) if rho > 0 else -math.inf)
            + math.log(math.comb(n - s, t)) + t * math.log(2) + total)


def ez_t_unfolded(mp: MomentParams) -> float:
    return math.exp(log_ez_t_unfolded(mp))


@dataclass(frozen=True)
class MonteCarloResult:
    mean: float
    stderr: float
    trials: int
    seed: int


def monte_carlo_ez_t(mp: MomentParams, trials: int = 100_000, seed: int = 0) -> MonteCarloResult:
    """Estimate the first moment by sampling clause inclusions.

    For every role split (u, v) each clause slot is present with probability p;
    a configuration counts when no forbidden slot is present and every
    non-starrable and non-invertible variable has at least one of its slots.
    """
    rng = np.random.default_rng(seed)
    n, s, t, p, rho = mp.n, mp.s, mp.t, mp.p, mp.rho
    prefix = rho ** (n - s - t) * math.comb(n - s, t) * 2.0 ** t
    acc = np.zeros(trials)
    for u in range(t + 1):
        for v in range(u + 1):
            cls = MomentParams(n, s, t, u, v, p, rho)
            c = clause_census(cls)
            ok = rng.binomial(forbidden_exponent(cls), p, size=trials) == 0
            if t - u:
                ok &= np.all(rng.binomial(c["type3_nonstarrable_each"], p, size=(trials, t - u)) > 0, axis=1)
            if u - v:
                ok &= np.all(rng.binomial(c["type3_noninvertible_each"], p, size=(trials, u - v)) > 0, axis=1)
            weight = (1 - rho) ** u * math.comb(t, u) * 2.0 ** (-v) * math.comb(u, v)
            acc += weight * ok
    acc *= prefix
    return MonteCarloResult(float(acc.mean()), float(acc.std(ddof=1) / math.sqrt(trials)), trials, seed)


# -- asymptotics ---------------------------------------------------------------------

def rho_of_a(a: float) -> float:
    """Star weight as an affine function of the core fraction; exceeds 1 for a > 0.7804."""
    return 0.3758 * a + 0.7067


@dataclass(frozen=True)
class AsymptoticParams:
    alpha: float
    a: float
    b: float
    rho: float
    d_param: float
    r: float | None = None

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise ParameterError(f"a = {self.a} outside (0, 1)")
        if not 0.0 <= self.b <= 1.0 - self.a:
            raise ParameterError(f"b = {self.b} outside [0, 1 - a]")
        if not self.alpha > 0:
            raise ParameterError(f"alpha = {self.alpha} must be positive")
        if not 0.0 <= self.rho <= 1.0:
            raise ParameterError(f"rho = {self.rho} is not a weight in [0, 1]")
        if not math.isfinite(self.d_param):
            raise ParameterError("d_param must be finite")


def _denominator(a):
    return 4 - a * a * (3 - a)


def exponent_terms(ap: AsymptoticParams) -> tuple[float, float]:
    """The two rates A and B of the asymptotic exponent."""
    alpha, a, b, d = ap.alpha, ap.a, ap.b, ap.d_param
    k = _denominator(a)
    big_a = 3 * alpha * (1 - d) * b * (b + 2 * a) / (2 * k)
    big_b = 6 * alpha * (1 - d) * (1 - a - b) * (a + b) / k
    return big_a, big_b


def exponent_h(ap: AsymptoticParams) -> float:
    """Limit of ln(E Z_t)/n, with x ln x = 0 at x = 0 on the boundaries."""
    alpha, a, b, rho, d = ap.alpha, ap.a, ap.b, ap.rho, ap.d_param
    c = 1 - a - b
    k = _denominator(a)
    entropy = xlogy(1 - a, 1 - a) + b * math.log(2) + xlogy(c, rho) - xlogy(b, b) - xlogy(c, c)
    forbidden = alpha * (1 - d) * b * (b * (6 - 5 * b - 3 * a) + 12 * c * a) / (2 * k)
    big_a, big_b = exponent_terms(ap)
    inner = -math.expm1(-big_a) + math.exp(-big_a) * (1 - rho) * (1 - math.exp(-big_b) / 2)
    return float(entropy - forbidden + xlogy(b, inner))


def clause_probability(alpha: float, a: float, d_param: float, n: int) -> float:
    """Leading-order per-clause inclusion probability at n variables."""
    return 3 * alpha * (1 - d_param) / (n * n * _denominator(a))


def finite_exponent(ap: AsymptoticParams, n: int) -> float:
    """(1/n) ln E Z_t at finite n with s = floor(a n), t = floor(b n)."""
    s = math.floor(ap.a * n)
    t = min(math.floor(ap.b * n), n - s)
    p = clause_probability(ap.alpha, ap.a, ap.d_param, n)
    return log_ez_t(MomentParams(n, s, t, 0, 0, p, ap.rho)) / n


# -- f plugin --------------------------------------------------------------------

FFunction = Callable[[float, float, float], float]


def missing_f(alpha: float, a: float, r: float) -> float:
    raise ExternalFormulaRequired(
        "the cover first-moment function f(alpha, a, r) is not shipped; pass a plugin "
        "file defining `def f(alpha, a, r) -> float` via --f-plugin")


def load_f_plugin(path) -> FFunction:
    """Import a python file and return its ``f(alpha, a, r)``."""
    spec = importlib.util.spec_from_file_location("csp_weighting_f_plugin", path)
    if spec is None or spec.loader is None:
        raise ExternalFormulaRequired(f"cannot load f plugin from {path}")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    f = getattr(module, "f", None)
    if not callable(f):
        raise ExternalFormulaRequired(f"{path} does not define a callable f(alpha, a, r)")
    return f


def f_plus_h(f: FFunction, d_param: float, rho: Callable[[float], float] = rho_of_a):
    """Objective (alpha, a, b, r) -> f + h; -inf where b leaves [0, 1 - a] or rho leaves [0, 1]."""
    def objective(alpha, a, b, r):
        try:
            h = exponent_h(AsymptoticParams(alpha, a, b, rho(a), d_param, r))
        except ParameterError:
            return -math.inf
        return f(alpha, a, r) + h
    return objective


# -- sweeps ----------------------------------------------------------------------

Box = Sequence[tuple[float, float]]


@dataclass
class SweepResult:
    argmax: tuple
    max_value: float
    grid_step: float
    refined: bool
    refine_step: float | None = None
    nonfinite: int = 0
    evaluations: int = 0
    coarse_argmax: tuple = field(default=())


def grid_axis(lo: float, hi: float, step: float) -> np.ndarray:
    if hi < lo:
        raise ParameterError(f"empty range [{lo}, {hi}]")
    if step <= 0:
        raise ParameterError("step must be positive")
    count = int(round((hi - lo) / step))
    axis = lo + step * np.arange(count + 1)
    return np.minimum(axis, hi)


def _scan(objective, axes: list[np.ndarray]) -> tuple[float, tuple | None, int, int]:
    """Best (value, point) over the product grid; first in lexicographic order wins ties."""
    best_val, best_pt, bad, count = -math.inf, None, 0, 0
    for pt in itertools.product(*axes):
        count += 1
        val = objective(*pt)
        if not math.isfinite(val):
            bad += 1
            continue
        if val > best_val:
            best_val, best_pt = val, tuple(float(c) for c in pt)
    return best_val, best_pt, bad, count


def _reduce(parts):
    best_val, best_pt, bad, count = -math.inf, None, 0, 0
    for val, pt, b, c in parts:
        bad += b
        count += c
        if pt is None:
            continue
        if val > best_val or (val == best_val and pt < best_pt):
            best_val, best_pt = val, pt
    return best_val, best_pt, bad, count


def _parallel_scan(objective, axes, workers):
    if workers is None or workers <= 1 or len(axes[0]) < 2:
        return _scan(objective, axes)
    slabs = np.array_split(axes[0], min(workers, len(axes[0])))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda slab: _scan(objective, [slab] + axes[1:]), slabs))
    return _reduce(parts)


def sweep_maximize(objective, box: Box, step: float, refine_step: float | None = None,
                   workers: int | None = None) -> SweepResult:
    """Grid maximisation of ``objective(*coords)`` over ``box``.

    After the coarse scan, a finer grid of pitch ``refine_step`` covers one coarse
    step on each side of the incumbent.  Non-finite values are skipped and counted.
    """
    axes = [grid_axis(lo, hi, step) for lo, hi in box]
    val, pt, bad, count = _parallel_scan(objective, axes, workers)
    if pt is None:
        raise ParameterError("objective is non-finite on the whole grid")
    coarse = pt
    if refine_step:
        fine = [grid_axis(max(lo, c - step), min(hi, c + step), refine_step)
                for c, (lo, hi) in zip(pt, box)]
        val2, pt2, bad2, count2 = _parallel_scan(objective, fine, workers)
        bad += bad2
        count += count2
        val, pt = _reduce([(val, pt, 0, 0), (val2, pt2, 0, 0)])[:2]
    return SweepResult(pt, float(val), step, bool(refine_step), refine_step, bad, count, coarse)


@dataclass
class ContourRegion:
    axes: list
    mask: np.ndarray

    def cells(self) -> list[tuple]:
        return [tuple(float(ax[i]) for ax, i in zip(self.axes, idx)) for idx in zip(*np.nonzero(self.mask))]

    def bounds(self) -> list[tuple[float, float]] | None:
        if not self.mask.any():
            return None
        out = []
        for k, ax in enumerate(self.axes):
            other = tuple(i for i in range(self.mask.ndim) if i != k)
            hit = np.flatnonzero(self.mask.any(axis=other))
            out.append((float(ax[hit[0]]), float(ax[hit[-1]])))
        return out


def contour_region(objective, threshold: float, box: Box, step: float) -> ContourRegion:
    """Grid cells of ``box`` where the objective exceeds ``threshold`` (non-finite cells excluded)."""
    axes = [grid_axis(lo, hi, step) for lo, hi in box]
    mask = np.zeros([len(ax) for ax in axes], dtype=bool)
    for idx in itertools.product(*(range(len(ax)) for ax in axes)):
        val = objective(*(float(ax[i]) for ax, i in zip(axes, idx)))
        mask[idx] = math.isfinite(val) and val > threshold
    return ContourRegion(axes, mask)
