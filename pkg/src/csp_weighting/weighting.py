"""Seeds, dispatchers and the weights they generate on a solutions network.

A :class:`WeightingSystem` holds a seed table ``s[x, a]`` and a dispatcher
table ``d[x, a]`` (both ``n x d`` arrays).  The weight of variable ``x`` in
solution σ keeps the seed of σ(x) and receives a share, proportional to the
dispatcher, of the seed mass of the values forbidden in σ's x-clique.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .csp import DEFAULT_CAP, SolutionNetwork, check_capacity, valuation_grid
from .errors import EmptyComponentError, FormatError, PreconditionError, UnknownSolutionError

EPS = 1e-9


def is_unitary(table, eps: float = EPS) -> bool:
    table = np.asarray(table, dtype=float)
    return bool(np.all(np.abs(table.sum(axis=1) - 1.0) <= eps))


class WeightingSystem:
    """Seed plus dispatcher; the dispatcher defaults to the seed (homogeneous)."""

    def __init__(self, seed, dispatcher=None, eps: float = EPS):
        seed = np.array(seed, dtype=float)
        if seed.ndim != 2:
            raise ValueError("seed must be an n x d table")
        if np.any(seed < 0) or not np.all(np.isfinite(seed)):
            raise PreconditionError("seed entries must be finite and nonnegative")
        dispatcher = seed.copy() if dispatcher is None else np.array(dispatcher, dtype=float)
        if dispatcher.shape != seed.shape:
            raise ValueError(f"dispatcher shape {dispatcher.shape} != seed shape {seed.shape}")
        if np.any(dispatcher <= 0) or not np.all(np.isfinite(dispatcher)):
            raise PreconditionError("dispatcher entries must be strictly positive")
        seed.setflags(write=False)
        dispatcher.setflags(write=False)
        self.seed = seed
        self.dispatcher = dispatcher
        self.eps = eps

    @classmethod
    def uniform(cls, n: int, d: int, eps: float = EPS) -> "WeightingSystem":
        return cls(np.full((n, d), 1.0 / d), eps=eps)

    @property
    def n(self) -> int:
        return self.seed.shape[0]

    @property
    def d(self) -> int:
        return self.seed.shape[1]

    @property
    def homogeneous(self) -> bool:
        return bool(np.all(np.abs(self.seed - self.dispatcher) <= self.eps))

    @property
    def unitary(self) -> bool:
        return is_unitary(self.seed, self.eps)

    def __repr__(self):
        kind = "homogeneous" if self.homogeneous else "heterogeneous"
        return f"WeightingSystem(n={self.n}, d={self.d}, {kind})"


def _index(net: SolutionNetwork, sigma) -> int:
    if isinstance(sigma, (int, np.integer)):
        if not 0 <= sigma < len(net):
            raise UnknownSolutionError(sigma)
        return int(sigma)
    return net.index_of(sigma)


def unladen_weight(sys: WeightingSystem, v: Sequence[int]) -> float:
    return float(np.prod([sys.seed[x, a] for x, a in enumerate(v)]))


def unladen_vector(sys: WeightingSystem, cap: int | None = DEFAULT_CAP) -> np.ndarray:
    """U(v) for every valuation, in lexicographic order."""
    grid = valuation_grid(sys.n, sys.d, cap)
    return np.prod(sys.seed[np.arange(sys.n)[None, :], grid], axis=1)


def generator(sys: WeightingSystem, x: int, a: int, delta: Iterable[int]) -> float:
    """ω(x, a, Δ): seed of ``a`` plus its dispatched share of the seed outside Δ."""
    delta = set(delta)
    if not delta:
        raise ValueError("Δ must be nonempty")
    if a not in delta:
        return 0.0
    s, disp = sys.seed[x], sys.dispatcher[x]
    inside = sorted(delta)
    outside = [b for b in range(sys.d) if b not in delta]
    return float(s[a] + disp[a] / disp[inside].sum() * s[outside].sum())


def actual_weight(sys: WeightingSystem, net: SolutionNetwork, sigma, x: int) -> float:
    i = _index(net, sigma)
    return generator(sys, x, net.solutions[i][x], net.allowed(i, x))


def weight_table(sys: WeightingSystem, net: SolutionNetwork) -> np.ndarray:
    """``w[i, x]`` for every solution index ``i`` and variable ``x``."""
    out = np.empty((len(net), net.n))
    cache = {}
    for i, sol in enumerate(net.solutions):
        for x in range(net.n):
            key = (x, sol[x], net.allowed(i, x))
            if key not in cache:
                cache[key] = generator(sys, *key)
            out[i, x] = cache[key]
    return out


def solution_weight(sys: WeightingSystem, net: SolutionNetwork, sigma) -> float:
    i = _index(net, sigma)
    return float(np.prod([actual_weight(sys, net, i, x) for x in range(net.n)]))


def set_weight(sys: WeightingSystem, net: SolutionNetwork, solutions=None) -> float:
    """W(S); ``solutions=None`` means the whole network."""
    weights = weight_table(sys, net).prod(axis=1)
    if solutions is None:
        return float(weights.sum())
    return float(sum(weights[_index(net, s)] for s in solutions))


def decomposer(sys: WeightingSystem, net: SolutionNetwork, sigma, x: int, a: int) -> float:
    """δ(σ, x, a) splitting w(σ, x) over the values of x."""
    i = _index(net, sigma)
    own = net.solutions[i][x]
    if a == own:
        return float(sys.seed[x, a])
    allowed = net.allowed(i, x)
    if a in allowed:
        return 0.0
    disp = sys.dispatcher[x]
    return float(disp[own] / disp[sorted(allowed)].sum() * sys.seed[x, a])


def decomposer_table(sys: WeightingSystem, net: SolutionNetwork) -> np.ndarray:
    """``delta[i, x, a]`` for the whole network."""
    out = np.zeros((len(net), net.n, sys.d))
    for i in range(len(net)):
        for x in range(net.n):
            for a in range(sys.d):
                out[i, x, a] = decomposer(sys, net, i, x, a)
    return out


def transfer(sys: WeightingSystem, net: SolutionNetwork, sigma, v: Sequence[int]) -> float:
    i = _index(net, sigma)
    return float(np.prod([decomposer(sys, net, i, x, a) for x, a in enumerate(v)]))


def transfer_matrix(delta: np.ndarray, cap: int | None = DEFAULT_CAP) -> np.ndarray:
    """``T[i, j]`` = transfer from solution ``i`` to valuation number ``j``."""
    m, n, d = delta.shape
    grid = valuation_grid(n, d, cap)
    out = np.ones((m, grid.shape[0]))
    for x in range(n):
        out *= delta[:, x, grid[:, x]]
    return out


@dataclass
class CoveringReport:
    covers: bool
    worst_valuation: tuple
    slack: float  # min over v of (sum of transfers to v) - U(v)


def check_covering(sys: WeightingSystem, net: SolutionNetwork, solutions, delta=None,
                   cap: int | None = DEFAULT_CAP) -> CoveringReport:
    """Does the transfer from ``solutions`` reach at least U(v) at every valuation v?

    ``delta`` overrides the decomposer table (shape ``(len(net), n, d)``).
    """
    check_capacity(sys.n, sys.d, cap)
    if delta is None:
        delta = decomposer_table(sys, net)
    idx = sorted({_index(net, s) for s in solutions})
    u = unladen_vector(sys, cap)
    if idx:
        received = transfer_matrix(delta[idx], cap).sum(axis=0)
    else:
        received = np.zeros_like(u)
    slack = received - u
    j = int(np.argmin(slack))
    grid = valuation_grid(sys.n, sys.d, cap)
    return CoveringReport(bool(slack[j] >= -sys.eps), tuple(int(a) for a in grid[j]), float(slack[j]))


@dataclass
class Witness:
    """Result of the Extend construction for one valuation and one component."""

    valuation: tuple
    restriction: dict          # v0: variable -> value, maximal extensible restriction
    free_variables: list       # x_1 .. x_n0 in ascending index
    leaves: list = field(default_factory=list)  # (solution index, fictitious weight)

    @property
    def total(self) -> float:
        return sum(f for _, f in self.leaves)


def extend_witness(sys: WeightingSystem, net: SolutionNetwork, component, v: Sequence[int]) -> Witness:
    """Spread U(v) over solutions of ``component`` along the Extend tree.

    The restriction v0 is grown greedily in variable order; τ(η) maximises the
    dispatcher mass of its clique on the variable being set, ties going to the
    smallest solution.
    """
    comp = sorted(_index(net, s) for s in component)
    if not comp:
        raise EmptyComponentError("component is empty")
    v = tuple(int(a) for a in v)
    sols = net.solutions
    disp = sys.dispatcher

    dom: list[int] = []
    for x in range(net.n):
        trial = dom + [x]
        if any(all(sols[i][y] == v[y] for y in trial) for i in comp):
            dom = trial
    free = [x for x in range(net.n) if x not in dom]
    witness = Witness(v, {x: v[x] for x in dom}, free)

    def extend(eta: dict, f: float, level: int):
        if level == 0:
            witness.leaves.append((net.index[tuple(eta[x] for x in range(net.n))], f))
            return
        xi = free[level - 1]
        candidates = [i for i in comp if all(sols[i][y] == a for y, a in eta.items())]
        best, best_mass = None, -1.0
        for i in candidates:
            mass = disp[xi, sorted(net.allowed(i, xi))].sum()
            if mass > best_mass:
                best, best_mass = i, mass
        for a in sorted(net.allowed(best, xi)):
            extend({**eta, xi: a}, disp[xi, a] / best_mass * f, level - 1)

    extend(dict(witness.restriction), unladen_weight(sys, v), len(free))
    return witness


@dataclass
class ComponentReport:
    component: tuple
    weight: float
    holds: bool

    @property
    def slack(self) -> float:
        return self.weight - 1.0


def verify_weight_conservation(sys: WeightingSystem, net: SolutionNetwork) -> list[ComponentReport]:
    """W(g) for each connected component g, with the check W(g) >= 1."""
    if not sys.unitary:
        raise PreconditionError("weight conservation needs a unitary seed")
    weights = weight_table(sys, net).prod(axis=1)
    out = []
    for comp in net.components:
        w = float(weights[list(comp)].sum())
        out.append(ComponentReport(comp, w, w >= 1.0 - sys.eps))
    return out


# -- ad-hoc weights (not generated by seeds) ----------------------------------

def adhoc_solution_weights(net: SolutionNetwork, table) -> np.ndarray:
    """Solution weights from an explicit ``{(solution, x): w}`` table; missing entries are 1."""
    w = np.ones((len(net), net.n))
    for (sol, x), value in table.items():
        w[_index(net, sol), x] = value
    return w.prod(axis=1)


def adhoc_decomposer_table(net: SolutionNetwork, table, seed) -> np.ndarray:
    """A decomposer for explicit weights: split w(σ, x) in proportion to a unitary seed."""
    seed = np.asarray(seed, dtype=float)
    w = np.ones((len(net), net.n))
    for (sol, x), value in table.items():
        w[_index(net, sol), x] = value
    return w[:, :, None] * seed[None, :, :]


# -- table format ----------------------------------------------------------------

def parse_tables(text: str, n: int, d: int, homogeneous: bool = False, eps: float = EPS) -> WeightingSystem:
    """Parse ``seed x a w`` / ``dispatch x a w`` lines; ``uniform`` fills both with 1/d.

    Without dispatch lines the system is homogeneous only if asked for, or if
    ``uniform`` was given.
    """
    seed = np.full((n, d), np.nan)
    disp = np.full((n, d), np.nan)
    saw_dispatch = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        if words == ["uniform"]:
            seed[:] = 1.0 / d
            disp[:] = 1.0 / d
            continue
        if words[0] not in ("seed", "dispatch") or len(words) != 4:
            raise FormatError("expected 'seed x a w', 'dispatch x a w' or 'uniform'", lineno)
        try:
            x, a, w = int(words[1]), int(words[2]), float(words[3])
        except ValueError:
            raise FormatError("bad numeric field", lineno) from None
        if not (0 <= x < n and 0 <= a < d):
            raise FormatError(f"entry ({x}, {a}) outside the {n} x {d} table", lineno)
        if words[0] == "seed":
            seed[x, a] = w
        else:
            disp[x, a] = w
            saw_dispatch = True
    if np.isnan(seed).any():
        raise FormatError("seed table is incomplete")
    if homogeneous:
        disp = seed.copy()
    elif np.isnan(disp).any():
        hint = "" if saw_dispatch else " (use --homogeneous to copy the seed)"
        raise FormatError("dispatcher table is incomplete" + hint)
    return WeightingSystem(seed, disp, eps=eps)


def load_tables(path, n: int, d: int, homogeneous: bool = False, eps: float = EPS) -> WeightingSystem:
    with open(path) as fh:
        return parse_tables(fh.read(), n, d, homogeneous=homogeneous, eps=eps)


def dump_tables(sys: WeightingSystem) -> str:
    lines = [f"seed {x} {a} {sys.seed[x, a]:.17g}" for x in range(sys.n) for a in range(sys.d)]
    lines += [f"dispatch {x} {a} {sys.dispatcher[x, a]:.17g}" for x in range(sys.n) for a in range(sys.d)]
    return "\n".join(lines) + "\n"


def random_system(rng: np.random.Generator, n: int, d: int, homogeneous: bool = False,
                  zero_prob: float = 0.0) -> WeightingSystem:
    """Random unitary seed (entries zeroed with ``zero_prob``) and positive dispatcher."""
    seed = rng.random((n, d)) + 1e-3
    if zero_prob:
        mask = rng.random((n, d)) < zero_prob
        mask[np.arange(n), rng.integers(0, d, n)] = False
        seed[mask] = 0.0
    seed /= seed.sum(axis=1, keepdims=True)
    if homogeneous:
        return WeightingSystem(seed)
    return WeightingSystem(seed, rng.random((n, d)) + 1e-3)


__all__ = [
    "EPS", "WeightingSystem", "is_unitary", "unladen_weight", "unladen_vector", "generator",
    "actual_weight", "weight_table", "solution_weight", "set_weight", "decomposer",
    "decomposer_table", "transfer", "transfer_matrix", "CoveringReport", "check_covering",
    "Witness", "extend_witness", "ComponentReport", "verify_weight_conservation",
    "adhoc_solution_weights", "adhoc_decomposer_table", "parse_tables", "load_tables",
    "dump_tables", "random_system",
]
