"""CNF formulas over the three-valued domain {0, 1, *}.

Values are encoded 0, 1 and ``STAR = 2`` so the generic network machinery
applies unchanged with ``d = 3``.  A valuation is valid when every clause has
a true literal or at least two literals on starred variables.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .csp import DEFAULT_CAP, SolutionNetwork, build_network, check_capacity, valuation_grid
from .errors import FormatError, MalformedInstanceError, PreconditionError
from .weighting import EPS

STAR = 2
SYMBOLS = ("0", "1", "*")


@dataclass(frozen=True)
class CnfFormula:
    n: int
    clauses: tuple  # tuples of nonzero signed 1-based literals

    def __post_init__(self):
        clauses = tuple(tuple(int(l) for l in c) for c in self.clauses)
        object.__setattr__(self, "clauses", clauses)
        for c in clauses:
            for lit in c:
                if lit == 0 or abs(lit) > self.n:
                    raise MalformedInstanceError(f"literal {lit} outside 1..{self.n}")

    def has_empty_clause(self) -> bool:
        return any(len(c) == 0 for c in self.clauses)


def format_star(v: Sequence[int]) -> str:
    return "".join(SYMBOLS[a] for a in v)


def parse_star(text: str) -> tuple[int, ...]:
    lookup = {s: i for i, s in enumerate(SYMBOLS)}
    try:
        return tuple(lookup[ch] for ch in text.strip())
    except KeyError as exc:
        raise FormatError(f"unknown symbol {exc.args[0]!r} in {text!r}") from None


def _literal_true(lit: int, value: int) -> bool:
    return value == (1 if lit > 0 else 0)


def is_valid(f: CnfFormula, v: Sequence[int]) -> bool:
    if len(v) != f.n:
        raise ValueError(f"valuation has length {len(v)}, formula has {f.n} variables")
    for clause in f.clauses:
        if any(_literal_true(l, v[abs(l) - 1]) for l in clause):
            continue
        if sum(v[abs(l) - 1] == STAR for l in clause) >= 2:
            continue
        return False
    return True


def is_boolean_solution(f: CnfFormula, v: Sequence[int]) -> bool:
    return all(a != STAR for a in v) and is_valid(f, v)


class StarSpace:
    """All 3**n valuations of a formula with validity and clique value-sets, vectorised.

    ``masks[i, x]`` has bit ``b`` set iff valuation ``i`` with x changed to ``b``
    is valid, i.e. it encodes A(σ, x) for valid σ.
    """

    def __init__(self, f: CnfFormula, cap: int | None = DEFAULT_CAP):
        check_capacity(f.n, 3, cap)
        self.formula = f
        grid = valuation_grid(f.n, 3, cap).astype(np.int8)
        valid = np.ones(grid.shape[0], dtype=bool)
        for clause in f.clauses:
            true = np.zeros_like(valid)
            stars = np.zeros(grid.shape[0], dtype=np.int8)
            for lit in clause:
                col = grid[:, abs(lit) - 1]
                true |= col == (1 if lit > 0 else 0)
                stars += col == STAR
            valid &= true | (stars >= 2)
        self.grid = grid
        self.valid = valid
        idx = np.arange(grid.shape[0])
        masks = np.zeros(grid.shape, dtype=np.int8)
        for x in range(f.n):
            stride = 3 ** (f.n - 1 - x)
            for b in range(3):
                shifted = idx + (b - grid[:, x].astype(np.int64)) * stride
                masks[:, x] |= (valid[shifted].astype(np.int8) << b)
        self.masks = masks

    @property
    def valid_indices(self) -> np.ndarray:
        return np.flatnonzero(self.valid)

    def boolean_solutions(self) -> np.ndarray:
        rows = self.valid & np.all(self.grid != STAR, axis=1)
        return self.grid[rows]

    def is_satisfiable(self) -> bool:
        return bool(len(self.boolean_solutions()))

    def improved_weights(self, seed) -> np.ndarray:
        """w(σ, x) for every valid σ (rows follow :attr:`valid_indices`)."""
        seed = np.asarray(seed, dtype=float)
        g = self.grid[self.valid].astype(np.int64)
        m = self.masks[self.valid]
        xs = np.arange(self.formula.n)[None, :]
        own = seed[xs, g]
        forbidden = sum(seed[:, b][None, :] * (((m >> b) & 1) == 0) for b in range(3))
        return np.where(g == STAR, own, own + forbidden)

    def maneva_weights(self, seed) -> np.ndarray:
        seed = np.asarray(seed, dtype=float)
        s0 = (seed[:, 0] + seed[:, 1])[None, :]
        sstar = seed[:, 2][None, :]
        g = self.grid[self.valid]
        star_allowed = ((self.masks[self.valid] >> STAR) & 1) == 1
        return np.where(g == STAR, sstar, np.where(star_allowed, s0, s0 + sstar))

    def gamma(self, seed) -> float:
        return float(self.improved_weights(seed).prod(axis=1).sum())


@dataclass
class StarWeights:
    """Per-variable triples (s(x,0), s(x,1), s(x,*)).

    In ``maneva`` mode the pair used is s0 = s(x,0) + s(x,1) and s* = s(x,*).
    """

    seed: np.ndarray
    mode: str = "improved"

    def __post_init__(self):
        self.seed = np.array(self.seed, dtype=float)
        if self.seed.ndim != 2 or self.seed.shape[1] != 3:
            raise ValueError("star seed must be an n x 3 table")
        if np.any(self.seed < 0):
            raise PreconditionError("star seed entries must be nonnegative")
        if self.mode not in ("improved", "maneva"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if np.any(np.abs(self.seed.sum(axis=1) - 1.0) > EPS):
            what = "s0 + s* = 1" if self.mode == "maneva" else "unitary triples"
            raise PreconditionError(f"{self.mode} weights need {what}")

    @classmethod
    def from_rho(cls, n: int, rho: float, mode: str = "improved") -> "StarWeights":
        """s(x,*) = ρ and s(x,0) = s(x,1) = (1 - ρ)/2 on every variable."""
        if not 0.0 <= rho <= 1.0:
            raise PreconditionError(f"ρ = {rho} is not a weight in [0, 1]")
        return cls(np.tile([(1 - rho) / 2, (1 - rho) / 2, rho], (n, 1)), mode)

    @property
    def n(self) -> int:
        return self.seed.shape[0]


def star_network(f: CnfFormula, cap: int | None = DEFAULT_CAP) -> SolutionNetwork:
    """The network whose vertices are all valid valuations."""
    space = StarSpace(f, cap)
    return build_network(map(tuple, space.grid[space.valid].tolist()), d=3, n=f.n)


def improved_generator(seed, x: int, a: int, delta) -> float:
    delta = set(delta)
    if a not in delta:
        return 0.0
    s = np.asarray(seed, dtype=float)[x]
    if a == STAR:
        return float(s[STAR])
    return float(s[a] + sum(s[b] for b in range(3) if b not in delta))


def weight_improved(net: SolutionNetwork, seed, sigma, x: int) -> float:
    i = sigma if isinstance(sigma, (int, np.integer)) else net.index_of(sigma)
    return improved_generator(seed, x, net.solutions[i][x], net.allowed(i, x))


def weight_maneva(net: SolutionNetwork, seed, sigma, x: int) -> float:
    """q(σ, x) with s0 = s(x,0) + s(x,1) and s* = s(x,*)."""
    i = sigma if isinstance(sigma, (int, np.integer)) else net.index_of(sigma)
    s = np.asarray(seed, dtype=float)[x]
    s0, sstar = s[0] + s[1], s[STAR]
    if net.solutions[i][x] == STAR:
        return float(sstar)
    if STAR in net.allowed(i, x):
        return float(s0)
    return float(s0 + sstar)


def star_decomposer(net: SolutionNetwork, seed, sigma, x: int, a: int) -> float:
    i = sigma if isinstance(sigma, (int, np.integer)) else net.index_of(sigma)
    own = net.solutions[i][x]
    if a == own or (own != STAR and a not in net.allowed(i, x)):
        return float(np.asarray(seed, dtype=float)[x, a])
    return 0.0


def star_decomposer_table(net: SolutionNetwork, seed) -> np.ndarray:
    out = np.zeros((len(net), net.n, 3))
    for i in range(len(net)):
        for x in range(net.n):
            for a in range(3):
                out[i, x, a] = star_decomposer(net, seed, i, x, a)
    return out


def gamma(f: CnfFormula, weights: StarWeights | np.ndarray, cap: int | None = DEFAULT_CAP) -> float:
    """Total improved weight of all valid valuations."""
    seed = weights.seed if isinstance(weights, StarWeights) else np.asarray(weights, dtype=float)
    return StarSpace(f, cap).gamma(seed)


# -- cores and covers ----------------------------------------------------------------

def starrable(f: CnfFormula, v: Sequence[int], x: int) -> bool:
    if v[x] == STAR:
        return False
    return is_valid(f, tuple(v[:x]) + (STAR,) + tuple(v[x + 1:]))


def core_of(f: CnfFormula, sigma: Sequence[int]) -> tuple[int, ...]:
    """Star starrable variables (ascending index, repeated passes) until none is left."""
    if not is_boolean_solution(f, sigma):
        raise PreconditionError("core_of needs a boolean solution")
    v = list(sigma)
    changed = True
    while changed:
        changed = False
        for x in range(f.n):
            if starrable(f, v, x):
                v[x] = STAR
                changed = True
    return tuple(v)


def is_cover(f: CnfFormula, v: Sequence[int]) -> bool:
    return is_valid(f, v) and not any(starrable(f, v, x) for x in range(f.n))


def is_core_nontrivial(v: Sequence[int]) -> bool:
    return any(a != STAR for a in v)


def core_size(v: Sequence[int]) -> int:
    return sum(a != STAR for a in v)


def count_flip_stable(f: CnfFormula, from_value: int = 0) -> int:
    """Boolean solutions where no variable at ``from_value`` can flip to the other value.

    ``from_value=0`` counts negatively prime solutions.
    """
    count = 0
    for sol in StarSpace(f).boolean_solutions().tolist():
        stable = True
        for x, a in enumerate(sol):
            if a == from_value:
                flipped = sol[:x] + [1 - a] + sol[x + 1:]
                if is_valid(f, flipped):
                    stable = False
                    break
        count += stable
    return count


# -- DIMACS ----------------------------------------------------------------------

def parse_dimacs(text: str) -> CnfFormula:
    n = m = None
    clauses, current = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("%"):
            break
        if line.startswith("p"):
            words = line.split()
            if len(words) != 4 or words[1] != "cnf":
                raise FormatError("expected 'p cnf <n> <m>'", lineno)
            try:
                n, m = int(words[2]), int(words[3])
            except ValueError:
                raise FormatError("bad problem line", lineno) from None
            continue
        if n is None:
            raise FormatError("clause before the 'p cnf' line", lineno)
        for w in line.split():
            try:
                lit = int(w)
            except ValueError:
                raise FormatError(f"bad literal {w!r}", lineno) from None
            if lit == 0:
                clauses.append(tuple(current))
                current = []
            else:
                current.append(lit)
    if n is None:
        raise FormatError("missing 'p cnf' line")
    if current:
        clauses.append(tuple(current))
    if m is not None and len(clauses) != m:
        raise FormatError(f"header announces {m} clauses, found {len(clauses)}")
    try:
        return CnfFormula(n, tuple(clauses))
    except MalformedInstanceError as exc:
        raise FormatError(str(exc)) from None


def load_dimacs(path) -> CnfFormula:
    with open(path) as fh:
        return parse_dimacs(fh.read())


def dump_dimacs(f: CnfFormula) -> str:
    lines = [f"p cnf {f.n} {len(f.clauses)}"]
    lines += [" ".join(map(str, c)) + " 0" for c in f.clauses]
    return "\n".join(lines) + "\n"


def parse_star_table(text: str, n: int) -> np.ndarray:
    """Per-variable seed triples: lines ``x s0 s1 s*``."""
    seed = np.full((n, 3), np.nan)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        try:
            x = int(words[0])
            seed[x] = [float(w) for w in words[1:4]]
        except (ValueError, IndexError):
            raise FormatError("expected 'x s0 s1 s*'", lineno) from None
    if np.isnan(seed).any():
        raise FormatError("star seed table is incomplete")
    return seed


def random_3cnf(rng: np.random.Generator, n: int, m: int) -> CnfFormula:
    """``m`` clauses on three distinct variables with uniform random signs."""
    clauses = []
    for _ in range(m):
        vars_ = rng.choice(n, size=3, replace=False) + 1
        signs = rng.choice([-1, 1], size=3)
        clauses.append(tuple(int(v * s) for v, s in zip(vars_, signs)))
    return CnfFormula(n, tuple(clauses))
