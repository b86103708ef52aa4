"""Orientations of the solutions network, minimal elements, and renamings.

An :class:`Orientation` fixes one total order per variable and orients each
x-clique with it.  :class:`LocalOrientation` lets every clique pick its own
order, which is how non-induced (and possibly cyclic) orientations are built.
"""
from __future__ import annotations

import itertools
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .csp import DEFAULT_CAP, Constraint, CspInstance, SolutionNetwork, network_of
from .errors import CapacityError, FormatError, PreconditionError
from .weighting import WeightingSystem, generator, is_unitary, weight_table

LESS, GREATER, INCOMPARABLE = "less", "greater", "incomparable"


class Orientation:
    """Per-variable total orders; ``orders[x]`` lists the domain in ascending order."""

    def __init__(self, orders: Sequence[Sequence[int]]):
        orders = tuple(tuple(int(a) for a in o) for o in orders)
        if not orders:
            raise ValueError("need at least one variable")
        d = len(orders[0])
        for x, o in enumerate(orders):
            if sorted(o) != list(range(d)):
                raise ValueError(f"order for variable {x} is not a permutation of 0..{d - 1}: {o}")
        self.orders = orders
        self._rank = [{a: r for r, a in enumerate(o)} for o in orders]

    @classmethod
    def identity(cls, n: int, d: int) -> "Orientation":
        return cls([tuple(range(d))] * n)

    @property
    def n(self) -> int:
        return len(self.orders)

    def less(self, x: int, a: int, b: int, delta=None) -> bool:
        return self._rank[x][a] < self._rank[x][b]

    def minimum(self, x: int, delta: Iterable[int]) -> int:
        return min(delta, key=self._rank[x].__getitem__)

    def __eq__(self, other):
        return isinstance(other, Orientation) and self.orders == other.orders

    def __repr__(self):
        return f"Orientation({self.orders})"


class LocalOrientation:
    """Clique-local orders: ``rule(x, Δ)`` returns Δ in ascending order."""

    def __init__(self, rule: Callable[[int, frozenset], Sequence[int]]):
        self.rule = rule

    def _rank(self, x, delta):
        order = list(self.rule(x, frozenset(delta)))
        if sorted(order) != sorted(delta):
            raise ValueError(f"rule for x={x}, Δ={sorted(delta)} returned {order}")
        return {a: r for r, a in enumerate(order)}

    def less(self, x: int, a: int, b: int, delta) -> bool:
        rank = self._rank(x, delta)
        return rank[a] < rank[b]

    def minimum(self, x: int, delta: Iterable[int]) -> int:
        rank = self._rank(x, delta)
        return min(rank, key=rank.__getitem__)


def orient(net: SolutionNetwork, orientation, sigma, tau) -> str:
    """Compare two solutions: ``'less'`` if σ ≺ τ, ``'greater'`` if τ ≺ σ, else incomparable."""
    i, j = _idx(net, sigma), _idx(net, tau)
    s, t = net.solutions[i], net.solutions[j]
    diff = [x for x in range(net.n) if s[x] != t[x]]
    if len(diff) != 1:
        return INCOMPARABLE
    x = diff[0]
    delta = net.allowed(i, x)
    return LESS if orientation.less(x, s[x], t[x], delta) else GREATER


def _idx(net, sigma):
    if isinstance(sigma, (int, np.integer)):
        return int(sigma)
    return net.index_of(sigma)


def directed_edges(net: SolutionNetwork, orientation) -> list[tuple[int, int]]:
    """Edges ``(src, dst)`` pointing from the larger solution to the smaller one."""
    out = []
    for i, j, x in net.edges():
        delta = net.allowed(i, x)
        if orientation.less(x, net.solutions[i][x], net.solutions[j][x], delta):
            out.append((j, i))
        else:
            out.append((i, j))
    return out


def is_circuit_free(net: SolutionNetwork, orientation) -> bool:
    edges = directed_edges(net, orientation)
    indeg = [0] * len(net)
    succ: list[list[int]] = [[] for _ in range(len(net))]
    for a, b in edges:
        succ[a].append(b)
        indeg[b] += 1
    queue = deque(i for i in range(len(net)) if indeg[i] == 0)
    seen = 0
    while queue:
        i = queue.popleft()
        seen += 1
        for j in succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                queue.append(j)
    return seen == len(net)


def minimal_elements(net: SolutionNetwork, orientation) -> list[int]:
    """Indices of solutions holding the minimum of every one of their cliques."""
    out = []
    for i, sol in enumerate(net.solutions):
        if all(orientation.minimum(x, net.allowed(i, x)) == sol[x] for x in range(net.n)):
            out.append(i)
    return out


# -- mixed weights -----------------------------------------------------------------

def binary_weight(net: SolutionNetwork, order: Sequence[int], i: int, x: int) -> float:
    """m(σ, x): 1 if σ(x) is the minimum of A(σ, x) for ``order``, else 0."""
    rank = {a: r for r, a in enumerate(order)}
    return 1.0 if min(net.allowed(i, x), key=rank.__getitem__) == net.solutions[i][x] else 0.0


def _mixed_table(sys: WeightingSystem, net: SolutionNetwork, xi: dict) -> np.ndarray:
    table = weight_table(sys, net)
    for x, order in xi.items():
        for i in range(len(net)):
            table[i, x] = binary_weight(net, order, i, x)
    return table


def mixed_weight(sys: WeightingSystem, net: SolutionNetwork, xi: dict | None = None) -> float:
    """Ω(S, Ξ): ordered variables (``xi`` maps variable -> ascending order) use m, others w."""
    xi = xi or {}
    if not len(net):
        return 0.0
    return float(_mixed_table(sys, net, xi).prod(axis=1).sum())


def z_table(sys: WeightingSystem, net: SolutionNetwork, xi: dict, x0: int) -> dict:
    """Z(a, Δ): mixed weight of solutions with σ(x0) = a and A(σ, x0) = Δ, leaving x0 out."""
    if x0 in xi:
        raise ValueError(f"variable {x0} is already ordered")
    table = _mixed_table(sys, net, xi)
    table[:, x0] = 1.0
    partial = table.prod(axis=1)
    out: dict = {}
    for i, sol in enumerate(net.solutions):
        key = (sol[x0], net.allowed(i, x0))
        out[key] = out.get(key, 0.0) + partial[i]
    return out


def zeta(z: dict, a: int, e) -> float:
    e = frozenset(e)
    return sum(val for (b, delta), val in z.items() if b == a and delta <= e)


def xi_sum(sys: WeightingSystem, z: dict, x0: int, e) -> float:
    e = frozenset(e)
    return sum(generator(sys, x0, a, delta) * val for (a, delta), val in z.items() if delta <= e)


@dataclass
class GreedyStep:
    variable: int
    order: tuple
    omega_before: float
    omega_after: float

    @property
    def slack(self) -> float:
        return self.omega_before - self.omega_after


@dataclass
class GreedyResult:
    orientation: Orientation
    steps: list = field(default_factory=list)
    weight: float = 0.0           # W(S(F)) = Ω(∅)
    minimal_count: int = 0

    @property
    def bound_holds(self) -> bool:
        return self.minimal_count <= self.weight + 1e-9


def greedy_order_construction(sys: WeightingSystem, net: SolutionNetwork) -> GreedyResult:
    """Order variables one at a time so that the mixed weight never grows.

    For each variable, values are removed from E = D one by one, always the one
    minimising ζ(a, E) + ξ(E \\ {a}) (smallest value on ties); removal order is
    the ascending order chosen for that variable.
    """
    if not sys.unitary:
        raise PreconditionError("greedy construction needs a unitary seed")
    if np.any(sys.seed <= 0):
        raise PreconditionError("greedy construction needs a strictly positive seed")
    if not sys.homogeneous:
        raise PreconditionError("greedy construction needs a homogeneous system (dispatcher = seed)")
    xi: dict = {}
    result = GreedyResult(Orientation.identity(net.n, sys.d))
    result.weight = mixed_weight(sys, net, xi)
    current = result.weight
    for x0 in range(net.n):
        z = z_table(sys, net, xi, x0)
        remaining = list(range(sys.d))
        order = []
        while remaining:
            best, best_val = None, None
            for a in remaining:
                rest = [b for b in remaining if b != a]
                val = zeta(z, a, remaining) + xi_sum(sys, z, x0, rest)
                if best_val is None or val < best_val:
                    best, best_val = a, val
            order.append(best)
            remaining.remove(best)
        xi[x0] = tuple(order)
        after = mixed_weight(sys, net, xi)
        result.steps.append(GreedyStep(x0, tuple(order), current, after))
        current = after
    result.orientation = Orientation([xi[x] for x in range(net.n)])
    result.minimal_count = len(minimal_elements(net, result.orientation))
    return result


# -- renamings ---------------------------------------------------------------------

class Renaming:
    """One permutation of the domain per variable; ``perms[x][a]`` is π_x(a)."""

    def __init__(self, perms: Sequence[Sequence[int]]):
        perms = tuple(tuple(int(a) for a in p) for p in perms)
        for x, p in enumerate(perms):
            if sorted(p) != list(range(len(p))):
                raise ValueError(f"image list for variable {x} is not a permutation: {p}")
        self.perms = perms

    @classmethod
    def identity(cls, n: int, d: int) -> "Renaming":
        return cls([tuple(range(d))] * n)

    @classmethod
    def transposition(cls, v1: Sequence[int], v2: Sequence[int], d: int) -> "Renaming":
        """Π_{v1,v2}: on each variable swap v1(x) and v2(x)."""
        perms = []
        for a1, a2 in zip(v1, v2):
            p = list(range(d))
            p[a1], p[a2] = a2, a1
            perms.append(tuple(p))
        return cls(perms)

    def inverse(self) -> "Renaming":
        inv = []
        for p in self.perms:
            q = [0] * len(p)
            for a, b in enumerate(p):
                q[b] = a
            inv.append(tuple(q))
        return Renaming(inv)

    def valuation(self, v: Sequence[int]) -> tuple[int, ...]:
        return tuple(self.perms[x][a] for x, a in enumerate(v))

    def instance(self, inst: CspInstance) -> CspInstance:
        cons = []
        for c in inst.constraints:
            allowed = frozenset(tuple(self.perms[x][a] for x, a in zip(c.scope, t)) for t in c.allowed)
            cons.append(Constraint(c.scope, allowed))
        return CspInstance(inst.n, inst.domain, tuple(cons))

    def __eq__(self, other):
        return isinstance(other, Renaming) and self.perms == other.perms

    def __repr__(self):
        return f"Renaming({self.perms})"


def apply_renaming(renaming: Renaming, obj):
    """Rename an instance or a valuation."""
    if isinstance(obj, CspInstance):
        return renaming.instance(obj)
    return renaming.valuation(obj)


def _generators(n: int, d: int) -> list[Renaming]:
    # a transposition and a full cycle on one variable generate Sym(D) there
    gens = []
    if d < 2:
        return gens
    swap = (1, 0) + tuple(range(2, d))
    cycle = tuple(range(1, d)) + (0,)
    for x in range(n):
        for p in dict.fromkeys((swap, cycle)):
            perms = [tuple(range(d))] * n
            perms[x] = p
            gens.append(Renaming(perms))
    return gens


def renaming_closure(family: Iterable[CspInstance], cap: int = 200_000) -> list[CspInstance]:
    """Smallest renaming-closed family containing ``family``, sorted by canonical form."""
    members: dict = {}
    queue = deque()
    for inst in family:
        key = inst.canonical_key()
        if key not in members:
            members[key] = inst
            queue.append(inst)
    gens: dict = {}
    while queue:
        inst = queue.popleft()
        shape = (inst.n, inst.d)
        if shape not in gens:
            gens[shape] = _generators(*shape)
        for g in gens[shape]:
            image = g.instance(inst)
            key = image.canonical_key()
            if key not in members:
                if len(members) >= cap:
                    raise CapacityError(f"renaming closure exceeds {cap} instances")
                members[key] = image
                queue.append(image)
    return [members[k] for k in sorted(members)]


def is_closed(family: Sequence[CspInstance]) -> bool:
    keys = {inst.canonical_key() for inst in family}
    for inst in family:
        for g in _generators(inst.n, inst.d):
            if g.instance(inst).canonical_key() not in keys:
                return False
    return True


@dataclass
class SetEqualityReport:
    minimal_total: int        # Σ_F |M(F)|
    gamma: float              # Σ_F W_F(S(F))
    couples: int              # |C|
    classes: int
    partition_ok: bool
    worst_class_deviation: float   # max |Σ_class W - 1|

    @property
    def difference(self) -> float:
        return self.gamma - self.minimal_total

    def holds(self, tol: float = 1e-6) -> bool:
        return (abs(self.difference) <= tol and self.partition_ok
                and self.worst_class_deviation <= tol)


def verify_set_equality(family: Sequence[CspInstance], orientation: Orientation,
                        sys: WeightingSystem, cap: int | None = DEFAULT_CAP,
                        check_closed: bool = True) -> SetEqualityReport:
    """Compare Σ|M| with γ over a renaming-closed family, checking the class partition.

    Every couple (σ, G) must land in exactly one class C(τ, F) with τ minimal
    in F, and each class must carry total weight 1.
    """
    family = list(family)
    if not is_unitary(sys.seed, sys.eps):
        raise PreconditionError("the generator must come from a unitary seed")
    if check_closed and not is_closed(family):
        raise PreconditionError("family is not closed under renaming")
    by_key = {}
    for inst in family:
        by_key.setdefault(inst.canonical_key(), inst)
    nets = {k: network_of(inst, cap) for k, inst in by_key.items()}
    weights = {k: weight_table(sys, net).prod(axis=1) if len(net) else np.zeros(0)
               for k, net in nets.items()}

    gamma = float(sum(w.sum() for w in weights.values()))
    couples = {(sol, k) for k, net in nets.items() for sol in net.solutions}
    hits: Counter = Counter()
    minimal_total = 0
    n_classes = 0
    partition_ok = True
    worst = 0.0
    for k, inst in by_key.items():
        net = nets[k]
        for t in minimal_elements(net, orientation):
            minimal_total += 1
            n_classes += 1
            tau = net.solutions[t]
            total = 0.0
            for sigma in itertools.product(*(sorted(net.allowed(t, x)) for x in range(net.n))):
                image = Renaming.transposition(sigma, tau, inst.d).instance(inst)
                gk = image.canonical_key()
                hits[(sigma, gk)] += 1
                if gk not in nets or sigma not in nets[gk]:
                    partition_ok = False
                    continue
                total += weights[gk][nets[gk].index[sigma]]
            worst = max(worst, abs(total - 1.0))
    if set(hits) != couples or any(c != 1 for c in hits.values()):
        partition_ok = False
    return SetEqualityReport(minimal_total, gamma, len(couples), n_classes, partition_ok, worst)


# -- text formats ------------------------------------------------------------------

def parse_orders(text: str, n: int, d: int) -> Orientation:
    """``order x v v' v''`` lines, values listed in ascending order."""
    orders: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        if words[0] != "order":
            raise FormatError("expected 'order x v v' ...'", lineno)
        try:
            x, values = int(words[1]), tuple(int(w) for w in words[2:])
        except (ValueError, IndexError):
            raise FormatError("bad order line", lineno) from None
        if not 0 <= x < n or sorted(values) != list(range(d)):
            raise FormatError(f"order for variable {x} must list 0..{d - 1} once each", lineno)
        orders[x] = values
    missing = [x for x in range(n) if x not in orders]
    if missing:
        raise FormatError(f"no order given for variables {missing}")
    return Orientation([orders[x] for x in range(n)])


def parse_renaming(text: str, n: int, d: int) -> Renaming:
    """``perm x image-list`` lines; unlisted variables keep the identity."""
    perms = [tuple(range(d))] * n
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        if words[0] != "perm":
            raise FormatError("expected 'perm x image-list'", lineno)
        try:
            x, image = int(words[1]), tuple(int(w) for w in words[2:])
        except (ValueError, IndexError):
            raise FormatError("bad perm line", lineno) from None
        if not 0 <= x < n or sorted(image) != list(range(d)):
            raise FormatError(f"perm for variable {x} must be a permutation of 0..{d - 1}", lineno)
        perms[x] = image
    return Renaming(perms)


def dump_orders(orientation: Orientation) -> str:
    return "".join(f"order {x} {' '.join(map(str, o))}\n" for x, o in enumerate(orientation.orders))
