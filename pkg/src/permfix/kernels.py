"""Markov kernels attached to the fixed-point count of a uniform permutation.

The central object is the penta-diagonal kernel P on V = [0, N-2] u {N}
driven by the conditional two-cycle mean p(x) = E[eta_2 | eta_1 = x], with

    P(x, x-1) = x(N-x) / (N(N-1))        P(x, x+1) = (N-x-2p(x)) / (N(N-1))
    P(x, x-2) = x(x-1) / (N(N-1))        P(x, x+2) = 2p(x) / (N(N-1))

and the diagonal completing each row.  Three independent routes to p are
provided (brute-force enumeration, the derangement closed form, and the
reversibility recursion), together with the derived birth-and-death kernels
and exact reversibility checking.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Mapping, Sequence

from .exactdist import ExactDist, derangements, fixed_point_pmf, poisson_truncated
from .perms import check_guard, eta1, eta2, iter_permutations


def state_space(N: int) -> tuple[int, ...]:
    """V = [0, N-2] u {N}: the values eta_1 can take (N-1 is impossible)."""
    return tuple(range(N - 1)) + (N,)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StochasticKernel:
    """Row-stochastic kernel over an explicit ordered state list.

    Entries are exact rationals; rows are stored as mappings keyed by the
    target *state label*, never by index arithmetic, so a state absent from
    the list (such as N-1 in V) cannot be addressed at all.
    """

    states: tuple[Hashable, ...]
    rows: tuple[Mapping[Hashable, Fraction], ...]
    label: str = ""

    def __post_init__(self) -> None:
        if len(self.states) != len(self.rows):
            raise ValueError("states/rows length mismatch")
        if len(set(self.states)) != len(self.states):
            raise ValueError("duplicate states")
        index = {s: i for i, s in enumerate(self.states)}
        frozen = []
        for s, row in zip(self.states, self.rows):
            total = Fraction(0)
            for t, w in row.items():
                if t not in index:
                    raise ValueError(f"row {s!r} targets unknown state {t!r}")
                if w < 0:
                    raise ValueError(f"negative entry at ({s!r}, {t!r}): {w}")
                total += w
            if total != 1:
                raise ValueError(f"row {s!r} sums to {total}, not 1")
            frozen.append({t: Fraction(w) for t, w in row.items() if w != 0})
        object.__setattr__(self, "rows", tuple(frozen))

    @property
    def size(self) -> int:
        return len(self.states)

    def index(self, state: Hashable) -> int:
        return self.states.index(state)

    def row(self, state: Hashable) -> Mapping[Hashable, Fraction]:
        return self.rows[self.index(state)]

    def entry(self, x: Hashable, y: Hashable) -> Fraction:
        return self.row(x).get(y, Fraction(0))

    def bandwidth(self) -> int:
        """Largest |i - j| over nonzero off-diagonal entries, in list positions."""
        pos = {s: i for i, s in enumerate(self.states)}
        width = 0
        for s, row in zip(self.states, self.rows):
            for t in row:
                width = max(width, abs(pos[s] - pos[t]))
        return width

    def is_invariant(self, weights: Mapping[Hashable, Fraction]) -> bool:
        """Does weights * K = weights hold exactly?"""
        acc: dict[Hashable, Fraction] = defaultdict(Fraction)
        for s, row in zip(self.states, self.rows):
            w = weights.get(s, Fraction(0))
            for t, v in row.items():
                acc[t] += w * v
        return all(acc[s] == weights.get(s, Fraction(0)) for s in self.states)

    def to_json_dict(self) -> dict:
        def enc(state: Hashable):
            return list(state) if isinstance(state, tuple) else state

        return {
            "label": self.label,
            "states": [enc(s) for s in self.states],
            "rows": [
                {
                    "from": enc(s),
                    "cols": [
                        {"to": enc(t), "num": w.numerator, "den": w.denominator}
                        for t, w in sorted(row.items(), key=lambda kv: self.index(kv[0]))
                    ],
                }
                for s, row in zip(self.states, self.rows)
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# the conditional two-cycle mean p
# ---------------------------------------------------------------------------

P_SOURCES = ("bruteforce", "closedform", "recursion")


@dataclass(frozen=True)
class PFunction:
    """Exact values of p(x) = E[eta_2 | eta_1 = x] on V.

    Boundary values p(N) = 0, p(N-2) = 1, p(N-3) = 0 are forced by the cycle
    structure, and 2p(N-2-x) - 1 alternates in sign with the parity of x;
    both facts are validated at construction.
    """

    N: int
    values: Mapping[int, Fraction]
    source: str

    def __post_init__(self) -> None:
        if self.source not in P_SOURCES:
            raise ValueError(f"source must be one of {P_SOURCES}")
        V = state_space(self.N)
        if set(self.values) != set(V):
            raise ValueError("p must be defined exactly on V")
        if any(v < 0 for v in self.values.values()):
            raise ValueError("p must be non-negative")
        if self.values[self.N] != 0:
            raise ValueError("p(N) must be 0")
        if self.N >= 2 and self.values[self.N - 2] != 1:
            raise ValueError("p(N-2) must be 1")
        if self.N >= 3 and self.values[self.N - 3] != 0:
            raise ValueError("p(N-3) must be 0")
        for x in range(self.N - 1):
            s = 2 * self.values[self.N - 2 - x] - 1
            if x % 2 == 0 and s <= 0:
                raise ValueError(f"2p(N-2-{x})-1 must be positive for even offsets")
            if x % 2 == 1 and s >= 0:
                raise ValueError(f"2p(N-2-{x})-1 must be negative for odd offsets")
        object.__setattr__(self, "values", dict(self.values))

    def __getitem__(self, x: int) -> Fraction:
        return self.values[x]


def p_bruteforce(N: int, guard: int = 8) -> PFunction:
    """p by full enumeration of S_N (guarded: N! permutations)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    check_guard(N, guard, "p_bruteforce")
    count: dict[int, int] = defaultdict(int)
    total2: dict[int, int] = defaultdict(int)
    for perm in iter_permutations(N):
        x = eta1(perm)
        count[x] += 1
        total2[x] += eta2(perm)
    values = {x: Fraction(total2[x], count[x]) for x in count}
    return PFunction(N=N, values=values, source="bruteforce")


def p_closedform(N: int) -> PFunction:
    """p(x) = (1/2) (D_{N-x-2} / (N-x-2)!) ((N-x)! / D_{N-x}) for x <= N-2."""
    if N < 1:
        raise ValueError("N must be >= 1")
    table = derangements(N)
    values: dict[int, Fraction] = {N: Fraction(0)}
    for x in range(N - 1):
        m = N - x
        values[x] = Fraction(1, 2) * Fraction(
            table[m - 2] * math.factorial(m), math.factorial(m - 2) * table[m]
        )
    return PFunction(N=N, values=values, source="closedform")


def recursion_map(N: int, x: int, r: Fraction) -> Fraction:
    """F_x(r) = (N-x)(N-x-1-r) / ((N-x-1)^2 - r); fixed point F_x(1) = 1."""
    return (N - x) * ((N - x - 1) - Fraction(r)) / ((N - x - 1) ** 2 - Fraction(r))


def p_recursion(N: int) -> PFunction:
    """p from the downward reversibility iteration seeded at k(N-3) = 0.

    Writes k = 2p and iterates k(x) = F_x(k(x+1)) from x = N-4 down to 0.
    This is the production path for large N: O(N) exact operations, no
    factorials of permutations.
    """
    if N < 4:
        raise ValueError("the recursion needs N >= 4")
    k: dict[int, Fraction] = {N - 3: Fraction(0)}
    for x in range(N - 4, -1, -1):
        k[x] = recursion_map(N, x, k[x + 1])
    values = {x: v / 2 for x, v in k.items()}
    values[N - 2] = Fraction(1)
    values[N] = Fraction(0)
    return PFunction(N=N, values=values, source="recursion")


# ---------------------------------------------------------------------------
# kernel builders
# ---------------------------------------------------------------------------

def _fill_diagonal(states: Sequence[Hashable], partial: dict) -> list[dict]:
    rows = []
    for s in states:
        row = dict(partial.get(s, {}))
        off = sum(row.values(), Fraction(0))
        row[s] = row.get(s, Fraction(0)) + (1 - off)
        rows.append(row)
    return rows


def build_penta(N: int, p: PFunction) -> StochasticKernel:
    """The penta-diagonal kernel P on V.

    The boundary coefficients vanish exactly where a move would leave V
    (p(N-3) = 0 kills (N-3, N-1), p(N-2) = 1 kills (N-2, N-1), p(N) = 0
    kills both upward moves from N); any nonzero weight pointing outside V
    is a construction error.
    """
    if p.N != N:
        raise ValueError("p was built for a different N")
    V = state_space(N)
    den = N * (N - 1)
    partial: dict[int, dict[int, Fraction]] = {}
    for x in V:
        up1 = Fraction(N - x, den) - 2 * p[x] / den
        if up1 < 0:
            raise ValueError(f"negative up-rate at x={x}: N-x-2p(x) < 0")
        moves = {
            x - 1: Fraction(x * (N - x), den),
            x - 2: Fraction(x * (x - 1), den),
            x + 1: up1,
            x + 2: 2 * p[x] / den,
        }
        row = {}
        for y, w in moves.items():
            if w == 0:
                continue
            if y not in V:
                raise ValueError(f"nonzero transition ({x}, {y}) exits V")
            row[y] = w
        partial[x] = row
    return StochasticKernel(V, tuple(_fill_diagonal(V, partial)), label="P")


def build_tridiag_tilde(N: int, p: PFunction) -> StochasticKernel:
    """P~ : the birth-and-death kernel keeping only the size-one moves of P,
    except between N-2 and N where the size-two move is kept (N-1 is not a
    state); removed weight goes to the diagonal."""
    if p.N != N:
        raise ValueError("p was built for a different N")
    V = state_space(N)
    den = N * (N - 1)
    partial: dict[int, dict[int, Fraction]] = {}
    for x in V:
        row: dict[int, Fraction] = {}
        if x != N and x >= 1:
            row[x - 1] = Fraction(x * (N - x), den)
        if x == N:
            row[N - 2] = Fraction(1)
        elif x == N - 2:
            row[N] = Fraction(2, den)
        else:
            up = Fraction(N - x, den) - 2 * p[x] / den
            if up != 0:
                row[x + 1] = up
        partial[x] = {y: w for y, w in row.items() if w != 0}
    return StochasticKernel(V, tuple(_fill_diagonal(V, partial)), label="P_tilde")


def hat_ordering(N: int) -> tuple[int, ...]:
    """The zig-zag ordering z of V behind P^.

    Even N:  N-3, N-5, ..., 3, 1, 0, 2, 4, ..., N-2, N
    Odd  N:  N-3, N-5, ..., 2, 0, 1, 3, ..., N-2, N
    Consecutive entries differ by two except at the single 0/1 seam, so the
    neighbor moves of the reordered chain are exactly the size-two moves of
    P plus the 0-1 edge that keeps it irreducible.
    """
    if N < 4:
        raise ValueError("the hat ordering needs N >= 4")
    head = (N - 1) // 2
    z = tuple(N - 3 - 2 * i for i in range(head)) + tuple(
        2 + 2 * i - N for i in range(head, N)
    )
    assert sorted(z) == list(state_space(N))
    return z


def build_hat(N: int) -> StochasticKernel:
    """P^ on index states [0, N-1]: P^(i, j) = P(z_i, z_j) for |i - j| = 1."""
    z = hat_ordering(N)
    penta = build_penta(N, p_closedform(N))
    states = tuple(range(N))
    partial: dict[int, dict[int, Fraction]] = {}
    for i in states:
        row: dict[int, Fraction] = {}
        for j in (i - 1, i + 1):
            if 0 <= j < N:
                w = penta.entry(z[i], z[j])
                if w != 0:
                    row[j] = w
        partial[i] = row
    return StochasticKernel(states, tuple(_fill_diagonal(states, partial)), label="P_hat")


def hat_stationary(N: int) -> ExactDist:
    """pi^ with pi^(i) = pi(z_i): the reversible law of P^."""
    z = hat_ordering(N)
    pi = fixed_point_pmf(N)
    return ExactDist.from_mapping({i: pi.pmf(z[i]) for i in range(N)}, label=f"pi_hat_{N}")


def _birth_death(N: int, up_num, label: str) -> StochasticKernel:
    """Birth-and-death kernel on [0, N-4] with down-rate x(N-x)/ (N(N-1))."""
    if N < 5:
        raise ValueError("the restricted kernels need N >= 5")
    states = tuple(range(N - 3))
    den = N * (N - 1)
    partial: dict[int, dict[int, Fraction]] = {}
    for x in states:
        row: dict[int, Fraction] = {}
        if x >= 1:
            row[x - 1] = Fraction(x * (N - x), den)
        if x + 1 <= N - 4:
            up = Fraction(up_num(x)) / den
            if up < 0:
                raise ValueError(f"negative up-rate at x={x}")
            if up != 0:
                row[x + 1] = up
        partial[x] = row
    return StochasticKernel(states, tuple(_fill_diagonal(states, partial)), label=label)


def build_restricted(N: int) -> tuple[StochasticKernel, StochasticKernel, StochasticKernel]:
    """(P_check, R, R_tilde) on [0, N-4].

    Up-rates are N-x-2p(x), N-x-1 and N-x-1/2 respectively over the common
    down-rate x(N-x); R is the p = 1/2 member whose reversible law is the
    conditioned Poisson zeta, and R_tilde dominates the p-chain from above.
    """
    p = p_closedform(N)
    p_check = _birth_death(N, lambda x: Fraction(N - x) - 2 * p[x], "P_check")
    r = _birth_death(N, lambda x: Fraction(N - x - 1), "R")
    r_tilde = _birth_death(N, lambda x: Fraction(N - x) - Fraction(1, 2), "R_tilde")
    return p_check, r, r_tilde


def poisson_reversible_penta(N: int) -> StochasticKernel:
    """The penta-diagonal kernel on the full interval [0, N] with p == 1/2.

    Up-rates N-x-1 and 1 (size one and two), down-rates x(N-x) and x(x-1);
    size-two moves that would exit [0, N] are structurally dropped.  The
    truncation of Poisson(1) to [0, N] is exactly reversible for it.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    states = tuple(range(N + 1))
    den = N * (N - 1)
    partial: dict[int, dict[int, Fraction]] = {}
    for x in states:
        row: dict[int, Fraction] = {}
        if x >= 1:
            row[x - 1] = Fraction(x * (N - x), den)
        if x >= 2:
            row[x - 2] = Fraction(x * (x - 1), den)
        if x + 1 <= N:
            w = Fraction(N - x - 1, den)
            if w != 0:
                row[x + 1] = w
        if x + 2 <= N:
            row[x + 2] = Fraction(1, den)
        partial[x] = {y: w for y, w in row.items() if w != 0}
    return StochasticKernel(states, tuple(_fill_diagonal(states, partial)), label="P_bar")


def poisson_box_law(N: int) -> ExactDist:
    """Poisson(1) conditioned on [0, N] (the reversible law of P_bar)."""
    return poisson_truncated(N, label=f"poisson_[0,{N}]")


def birth_death_stationary(kernel: StochasticKernel, label: str = "") -> ExactDist:
    """Stationary law of an irreducible birth-and-death kernel via the
    detailed-balance product formula w(x+1)/w(x) = K(x, x+1)/K(x+1, x)."""
    states = kernel.states
    if kernel.bandwidth() > 1:
        raise ValueError("kernel is not tri-diagonal in its state order")
    weights = {states[0]: Fraction(1)}
    for i in range(len(states) - 1):
        x, y = states[i], states[i + 1]
        up = kernel.entry(x, y)
        down = kernel.entry(y, x)
        if up == 0 or down == 0:
            raise ValueError(f"kernel not irreducible across edge ({x!r}, {y!r})")
        weights[y] = weights[x] * up / down
    total = sum(weights.values(), Fraction(0))
    return ExactDist.from_mapping(
        {s: w / total for s, w in weights.items()},
        label=label or f"stationary({kernel.label})",
    )


# ---------------------------------------------------------------------------
# reversibility checking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReversibilityReport:
    """Outcome of exact detailed-balance and Kolmogorov-cycle verification."""

    kernel_label: str
    dist_label: str
    detailed_balance_ok: bool
    kolmogorov_ok: bool
    pairs_checked: int
    triangles_checked: int
    first_violation: tuple | None = None  # (x, y, residual) or (x, y, z, residual)

    @property
    def ok(self) -> bool:
        return self.detailed_balance_ok and self.kolmogorov_ok


def check_reversibility(kernel: StochasticKernel, dist: ExactDist | Mapping) -> ReversibilityReport:
    """Verify d(x) K(x,y) = d(y) K(y,x) on all pairs and the Kolmogorov cycle
    condition on all triangles of consecutive states; states carrying zero
    weight are rejected outright."""
    weights = dist.as_dict() if isinstance(dist, ExactDist) else dict(dist)
    for s in kernel.states:
        if weights.get(s, Fraction(0)) <= 0:
            raise ValueError(f"state {s!r} has zero weight under {getattr(dist, 'label', 'dist')}")

    db_ok = True
    first = None
    pairs = 0
    states = kernel.states
    for i, x in enumerate(states):
        for y in states[i + 1:]:
            lhs = weights[x] * kernel.entry(x, y)
            rhs = weights[y] * kernel.entry(y, x)
            pairs += 1
            if lhs != rhs and db_ok:
                db_ok = False
                first = (x, y, lhs - rhs)

    kol_ok = True
    triangles = 0
    for i in range(len(states) - 2):
        x, y, z = states[i], states[i + 1], states[i + 2]
        fwd = kernel.entry(x, y) * kernel.entry(y, z) * kernel.entry(z, x)
        bwd = kernel.entry(x, z) * kernel.entry(z, y) * kernel.entry(y, x)
        triangles += 1
        if fwd != bwd:
            kol_ok = False
            if first is None:
                first = (x, y, z, fwd - bwd)

    return ReversibilityReport(
        kernel_label=kernel.label,
        dist_label=getattr(dist, "label", ""),
        detailed_balance_ok=db_ok,
        kolmogorov_ok=kol_ok,
        pairs_checked=pairs,
        triangles_checked=triangles,
        first_violation=first,
    )


def prop41_bound(N: int, x: int) -> Fraction:
    """|2p(x) - 1| <= 1/(N-x-2)! for x in [0, N-2]."""
    return Fraction(1, math.factorial(N - x - 2))


def lemma_b1_bound(N: int, x: int) -> Fraction:
    """|2p(x) - 1| <= 3 (N-x-1) / (N-x)! for x in [0, N-2]."""
    return 3 * Fraction(N - x - 1, math.factorial(N - x))
