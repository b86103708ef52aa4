"""CSP instances, exhaustive solving and the solutions network.

Values are handled internally as domain indices ``0 .. d-1``; a valuation is
a tuple of such indices, one per variable. Domain symbols are kept on the
instance for display only.
"""
from __future__ import annotations

import itertools
import string
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    CapacityError,
    DuplicateSolutionError,
    FormatError,
    MalformedInstanceError,
    UnknownSolutionError,
)

# refuse d**n above this unless the caller raises the cap
DEFAULT_CAP = 2 ** 24

Valuation = tuple


def default_domain(d: int) -> tuple[str, ...]:
    if d <= 26:
        return tuple(string.ascii_lowercase[:d])
    return tuple(str(i) for i in range(d))


def check_capacity(n: int, d: int, cap: int | None = DEFAULT_CAP) -> None:
    if cap is not None and d ** n > cap:
        raise CapacityError(f"{d}**{n} valuations exceed the exhaustion cap {cap}")


@dataclass(frozen=True)
class Constraint:
    """A scope of variable indices and the set of allowed value tuples."""

    scope: tuple[int, ...]
    allowed: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "scope", tuple(int(x) for x in self.scope))
        object.__setattr__(
            self, "allowed", frozenset(tuple(int(a) for a in t) for t in self.allowed)
        )

    @property
    def arity(self) -> int:
        return len(self.scope)

    @classmethod
    def forbidding(cls, scope, forbidden, d: int) -> "Constraint":
        """Build the constraint whose allowed set is the complement of ``forbidden``."""
        forbidden = {tuple(t) for t in forbidden}
        allowed = [t for t in itertools.product(range(d), repeat=len(scope)) if t not in forbidden]
        return cls(tuple(scope), frozenset(allowed))


def satisfies(v: Sequence[int], c: Constraint) -> bool:
    if any(not 0 <= x < len(v) for x in c.scope):
        raise MalformedInstanceError(
            f"constraint scope {c.scope} out of range for a valuation of length {len(v)}"
        )
    return tuple(v[x] for x in c.scope) in c.allowed


@dataclass(frozen=True)
class CspInstance:
    n: int
    domain: tuple
    constraints: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(self.domain))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.n < 1:
            raise MalformedInstanceError("an instance needs at least one variable")
        if len(set(self.domain)) != len(self.domain) or not self.domain:
            raise MalformedInstanceError("domain values must be distinct and nonempty")
        d = len(self.domain)
        for c in self.constraints:
            for x in c.scope:
                if not 0 <= x < self.n:
                    raise MalformedInstanceError(f"scope index {x} outside 0..{self.n - 1}")
            for t in c.allowed:
                if len(t) != c.arity:
                    raise MalformedInstanceError(
                        f"tuple {t} has arity {len(t)}, scope {c.scope} has {c.arity}"
                    )
                if any(not 0 <= a < d for a in t):
                    raise MalformedInstanceError(f"tuple {t} uses a value outside the domain")

    @property
    def d(self) -> int:
        return len(self.domain)

    def is_solution(self, v: Sequence[int]) -> bool:
        return all(satisfies(v, c) for c in self.constraints)

    def canonical_key(self) -> tuple:
        """Hashable form that ignores constraint order and duplicates."""
        cons = sorted({(c.scope, tuple(sorted(c.allowed))) for c in self.constraints})
        return (self.n, self.d, tuple(cons))

    def format_valuation(self, v: Sequence[int]) -> str:
        return format_valuation(v, self.domain)


def format_valuation(v: Sequence[int], domain: Sequence | None = None) -> str:
    if domain is None:
        domain = default_domain(max(v, default=0) + 1)
    symbols = [str(domain[a]) for a in v]
    if all(len(s) == 1 for s in symbols):
        return "".join(symbols)
    return ",".join(symbols)


def parse_valuation(text: str, domain: Sequence) -> tuple[int, ...]:
    lookup = {str(s): i for i, s in enumerate(domain)}
    parts = text.split(",") if "," in text else list(text)
    try:
        return tuple(lookup[p.strip()] for p in parts)
    except KeyError as exc:
        raise FormatError(f"unknown value {exc.args[0]!r} in valuation {text!r}") from None


def all_valuations(n: int, d: int, cap: int | None = DEFAULT_CAP) -> Iterator[tuple[int, ...]]:
    """Every valuation in lexicographic order of domain indices."""
    check_capacity(n, d, cap)
    return itertools.product(range(d), repeat=n)


def valuation_grid(n: int, d: int, cap: int | None = DEFAULT_CAP) -> np.ndarray:
    """All ``d**n`` valuations as an int array, row ``i`` being valuation number ``i``.

    Variable 0 is the most significant digit, matching :func:`all_valuations`.
    """
    check_capacity(n, d, cap)
    idx = np.arange(d ** n)
    powers = d ** np.arange(n - 1, -1, -1)
    return (idx[:, None] // powers[None, :]) % d


def enumerate_solutions(inst: CspInstance, cap: int | None = DEFAULT_CAP) -> list[tuple[int, ...]]:
    """All solutions of ``inst`` by backtracking, in lexicographic order."""
    check_capacity(inst.n, inst.d, cap)
    n, d = inst.n, inst.d
    # each constraint is checked as soon as its last scope variable is set
    due: list[list[Constraint]] = [[] for _ in range(n)]
    for c in inst.constraints:
        if c.arity == 0:
            if () not in c.allowed:
                return []
            continue
        due[max(c.scope)].append(c)

    out = []
    v = [0] * n

    def backtrack(x):
        if x == n:
            out.append(tuple(v))
            return
        for a in range(d):
            v[x] = a
            if all(tuple(v[y] for y in c.scope) in c.allowed for c in due[x]):
                backtrack(x + 1)

    backtrack(0)
    return out


class SolutionNetwork:
    """Solutions plus their per-variable adjacency cliques.

    Solutions are stored sorted; the integer index of a solution is its rank in
    that order. ``clique(i, x)`` is N(σ, x) and ``allowed(i, x)`` is A(σ, x).
    """

    def __init__(self, solutions: Iterable[Sequence[int]], d: int | None = None, n: int | None = None):
        sols = [tuple(int(a) for a in s) for s in solutions]
        if len(set(sols)) != len(sols):
            raise DuplicateSolutionError("solution set contains duplicates")
        sols.sort()
        lengths = {len(s) for s in sols}
        if len(lengths) > 1:
            raise MalformedInstanceError("solutions have different lengths")
        if n is None:
            n = lengths.pop() if lengths else 0
        elif lengths and lengths != {n}:
            raise MalformedInstanceError(f"solutions are not of length {n}")
        max_value = max((max(s) for s in sols if s), default=-1)
        if d is None:
            d = max_value + 1
        elif max_value >= d or any(a < 0 for s in sols for a in s):
            raise MalformedInstanceError("solution value outside the domain")
        self.n = n
        self.d = d
        self.solutions: tuple[tuple[int, ...], ...] = tuple(sols)
        self.index = {s: i for i, s in enumerate(sols)}

        self._group_of = [[0] * len(sols) for _ in range(n)]
        self._groups: list[list[tuple[int, ...]]] = []
        self._group_values: list[list[frozenset]] = []
        for x in range(n):
            buckets: dict[tuple, list[int]] = {}
            for i, s in enumerate(sols):
                buckets.setdefault(s[:x] + s[x + 1:], []).append(i)
            groups, values = [], []
            for members in buckets.values():
                gid = len(groups)
                groups.append(tuple(members))
                values.append(frozenset(sols[j][x] for j in members))
                for j in members:
                    self._group_of[x][j] = gid
            self._groups.append(groups)
            self._group_values.append(values)
        self._components = None

    def __len__(self):
        return len(self.solutions)

    def __contains__(self, sol):
        return tuple(sol) in self.index

    def index_of(self, sol: Sequence[int]) -> int:
        try:
            return self.index[tuple(sol)]
        except KeyError:
            raise UnknownSolutionError(f"{tuple(sol)} is not a solution of this network") from None

    def clique(self, i: int, x: int) -> tuple[int, ...]:
        return self._groups[x][self._group_of[x][i]]

    def allowed(self, i: int, x: int) -> frozenset:
        return self._group_values[x][self._group_of[x][i]]

    def cliques(self, x: int) -> list[tuple[int, ...]]:
        return list(self._groups[x])

    def neighbour(self, i: int, x: int, a: int) -> int | None:
        """Index of σ_{x←a} if it is a solution, else None."""
        s = self.solutions[i]
        return self.index.get(s[:x] + (a,) + s[x + 1:])

    def edges(self) -> list[tuple[int, int, int]]:
        """Undirected edges ``(i, j, x)`` with ``i < j`` and i, j x-adjacent."""
        out = []
        for x in range(self.n):
            for members in self._groups[x]:
                out.extend((i, j, x) for i, j in itertools.combinations(members, 2))
        return sorted(out)

    @property
    def components(self) -> tuple[tuple[int, ...], ...]:
        if self._components is None:
            self._components = connected_components(self)
        return self._components

    def component_of(self, i: int) -> tuple[int, ...]:
        for comp in self.components:
            if i in comp:
                return comp
        raise UnknownSolutionError(i)


def build_network(solutions: Iterable[Sequence[int]], d: int | None = None, n: int | None = None) -> SolutionNetwork:
    return SolutionNetwork(solutions, d=d, n=n)


def network_of(inst: CspInstance, cap: int | None = DEFAULT_CAP) -> SolutionNetwork:
    return SolutionNetwork(enumerate_solutions(inst, cap), d=inst.d, n=inst.n)


def connected_components(net: SolutionNetwork) -> tuple[tuple[int, ...], ...]:
    """Components of the solutions network, each sorted, ordered by smallest member."""
    parent = list(range(len(net)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for x in range(net.n):
        for members in net.cliques(x):
            root = find(members[0])
            for j in members[1:]:
                rj = find(j)
                if rj != root:
                    parent[rj] = root
    comps: dict[int, list[int]] = {}
    for i in range(len(net)):
        comps.setdefault(find(i), []).append(i)
    return tuple(sorted(tuple(c) for c in comps.values()))


def bfs_components(net: SolutionNetwork) -> list[list[int]]:
    """Breadth-first component search over explicit edges (used as a cross-check)."""
    adj = {i: set() for i in range(len(net))}
    for i, j, _ in net.edges():
        adj[i].add(j)
        adj[j].add(i)
    seen, out = set(), []
    for start in range(len(net)):
        if start in seen:
            continue
        comp, queue = [], deque([start])
        seen.add(start)
        while queue:
            i = queue.popleft()
            comp.append(i)
            for j in adj[i]:
                if j not in seen:
                    seen.add(j)
                    queue.append(j)
        out.append(sorted(comp))
    return out


def random_instance(rng: np.random.Generator, n: int, d: int, n_constraints: int,
                    max_arity: int = 2, density: float = 0.6) -> CspInstance:
    """A random instance; each tuple of each relation is kept with probability ``density``."""
    cons = []
    for _ in range(n_constraints):
        k = int(rng.integers(1, min(max_arity, n) + 1))
        scope = tuple(sorted(rng.choice(n, size=k, replace=False).tolist()))
        tuples = list(itertools.product(range(d), repeat=k))
        keep = rng.random(len(tuples)) < density
        cons.append(Constraint(scope, frozenset(t for t, ok in zip(tuples, keep) if ok)))
    return CspInstance(n, default_domain(d), tuple(cons))


# -- text format -------------------------------------------------------------

def parse_csp(text: str) -> CspInstance:
    """Parse the line-based CSP format.

    ::

        csp <n> <d>
        domain a b c          # optional value symbols
        2 0 1 ; 0 1 | 0 0     # scope (x0, x1), allowed tuples (0,1) and (0,0)
        forbid 1 0 ; 2        # complement form: x0 may take any value but 2
    """
    header = None
    domain = None
    pending = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        if header is None:
            if words[0] != "csp" or len(words) != 3:
                raise FormatError("expected header 'csp <n> <d>'", lineno)
            try:
                header = (int(words[1]), int(words[2]))
            except ValueError:
                raise FormatError("n and d must be integers", lineno) from None
            continue
        if words[0] == "domain":
            domain = tuple(words[1:])
            continue
        pending.append((lineno, line))
    if header is None:
        raise FormatError("missing 'csp <n> <d>' header")
    n, d = header
    if domain is None:
        domain = default_domain(d)
    elif len(domain) != d:
        raise FormatError(f"domain line lists {len(domain)} values, header says {d}")

    constraints = []
    for lineno, line in pending:
        forbid = False
        if line.startswith("forbid"):
            forbid = True
            line = line[len("forbid"):]
        if ";" not in line:
            raise FormatError("constraint line needs ';' between scope and tuples", lineno)
        head, body = line.split(";", 1)
        try:
            nums = [int(w) for w in head.split()]
            k, scope = nums[0], tuple(nums[1:])
        except (ValueError, IndexError):
            raise FormatError("bad scope", lineno) from None
        if len(scope) != k:
            raise FormatError(f"scope declares {k} variables but lists {len(scope)}", lineno)
        tuples = []
        for chunk in body.split("|"):
            if not chunk.strip():
                continue
            try:
                t = tuple(int(w) for w in chunk.split())
            except ValueError:
                raise FormatError(f"bad tuple {chunk.strip()!r}", lineno) from None
            if len(t) != k:
                raise FormatError(f"tuple {t} does not have arity {k}", lineno)
            tuples.append(t)
        try:
            if forbid:
                constraints.append(Constraint.forbidding(scope, tuples, d))
            else:
                constraints.append(Constraint(scope, frozenset(tuples)))
        except MalformedInstanceError as exc:
            raise FormatError(str(exc), lineno) from None
    try:
        return CspInstance(n, domain, tuple(constraints))
    except MalformedInstanceError as exc:
        raise FormatError(str(exc)) from None


def load_csp(path) -> CspInstance:
    with open(path) as fh:
        return parse_csp(fh.read())


def dump_csp(inst: CspInstance) -> str:
    lines = [f"csp {inst.n} {inst.d}", "domain " + " ".join(str(s) for s in inst.domain)]
    for c in inst.constraints:
        tuples = " | ".join(" ".join(map(str, t)) for t in sorted(c.allowed))
        lines.append(f"{c.arity} {' '.join(map(str, c.scope))} ; {tuples}".rstrip())
    return "\n".join(lines) + "\n"
