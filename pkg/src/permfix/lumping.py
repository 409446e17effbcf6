"""Projection of Markov chains along a state-space partition.

Given a kernel Q on W with invariant law mu and a partition W = union of
blocks A_v, the projected kernel on block ids is

    P(v, v') = sum_{w in A_v, w' in A_{v'}} (mu(w) / mu(A_v)) Q(w, w')

with link kernel Lambda(w, v) = mu(A_v).  The intertwining Q Lambda =
Lambda P holds exactly and reversibility of mu transfers to the projected
invariant law.  Instantiated on the symmetric group: the transposition walk,
its lumping to cycle types (the coagulation-fragmentation chain, built two
independent ways and cross-checked), and the further lumping through the
fixed-point count that reproduces the penta-diagonal kernel.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Mapping

from .kernels import StochasticKernel
from .perms import (
    CycleType,
    all_cycle_types,
    apply_transposition,
    check_guard,
    iter_permutations,
)


@dataclass(frozen=True)
class PartitionedChain:
    """A kernel with exact invariant law and a partition of its state space."""

    kernel: StochasticKernel
    invariant: Mapping[Hashable, Fraction]
    blocks: Mapping[Hashable, Hashable]

    def __post_init__(self) -> None:
        states = self.kernel.states
        inv = {s: Fraction(self.invariant.get(s, Fraction(0))) for s in states}
        if set(self.invariant) != set(states):
            raise ValueError("invariant law must be defined exactly on the states")
        if any(w < 0 for w in inv.values()):
            raise ValueError("invariant weights must be non-negative")
        if sum(inv.values(), Fraction(0)) != 1:
            raise ValueError("invariant weights must sum to 1")
        if not self.kernel.is_invariant(inv):
            raise ValueError("mu Q != mu: not an invariant law")
        if set(self.blocks) != set(states):
            raise ValueError("every state must be assigned a block")
        object.__setattr__(self, "invariant", inv)
        object.__setattr__(self, "blocks", dict(self.blocks))

    def block_ids(self) -> tuple[Hashable, ...]:
        return tuple(sorted(set(self.blocks.values())))

    def block_members(self) -> dict[Hashable, list[Hashable]]:
        members: dict[Hashable, list[Hashable]] = defaultdict(list)
        for s in self.kernel.states:
            members[self.blocks[s]].append(s)
        return dict(members)

    def block_mass(self) -> dict[Hashable, Fraction]:
        mass: dict[Hashable, Fraction] = defaultdict(Fraction)
        for s, v in self.blocks.items():
            mass[v] += self.invariant[s]
        return dict(mass)


@dataclass(frozen=True)
class ProjectionResult:
    """Projected kernel, the link kernel (all rows equal mu_1), and mu_1 itself."""

    kernel: StochasticKernel
    link_row: dict[Hashable, Fraction]
    mu1: dict[Hashable, Fraction]


def project(chain: PartitionedChain) -> ProjectionResult:
    """Project the chain along its partition and certify the intertwining.

    Both products Q Lambda and Lambda P are formed entrywise over the full
    W x V index set and compared exactly; mu_1 is verified invariant for the
    projected kernel.  A zero-mass block is an error.
    """
    mass = chain.block_mass()
    ids = chain.block_ids()
    for v in ids:
        if mass[v] == 0:
            raise ValueError(f"block {v!r} has zero invariant mass")

    members = chain.block_members()
    Q = chain.kernel
    mu = chain.invariant

    rows: dict[Hashable, dict[Hashable, Fraction]] = {v: defaultdict(Fraction) for v in ids}
    for v in ids:
        for w in members[v]:
            share = mu[w] / mass[v]
            for w2, q in Q.row(w).items():
                rows[v][chain.blocks[w2]] += share * q
    projected = StochasticKernel(
        ids,
        tuple({t: w for t, w in rows[v].items() if w != 0} for v in ids),
        label=f"proj({Q.label})",
    )

    # intertwining Q Lambda = Lambda P, checked entrywise over W x V
    mu1_p: dict[Hashable, Fraction] = defaultdict(Fraction)
    for v in ids:
        for t, w in projected.row(v).items():
            mu1_p[t] += mass[v] * w
    for w in Q.states:
        row_total = sum(Q.row(w).values(), Fraction(0))  # = 1
        for v in ids:
            q_lambda = row_total * mass[v]
            lambda_p = mu1_p[v]
            if q_lambda != lambda_p:
                raise AssertionError(
                    f"intertwining fails at ({w!r}, {v!r}): {q_lambda} != {lambda_p}"
                )
    if not projected.is_invariant(mass):
        raise AssertionError("mu_1 is not invariant for the projected kernel")

    return ProjectionResult(kernel=projected, link_row=dict(mass), mu1=dict(mass))


@dataclass(frozen=True)
class TransferReport:
    upstream_reversible: bool
    projected_reversible: bool


def _is_reversible(kernel: StochasticKernel, weights: Mapping[Hashable, Fraction]) -> bool:
    for i, x in enumerate(kernel.states):
        for y in kernel.states[i + 1:]:
            if weights[x] * kernel.entry(x, y) != weights[y] * kernel.entry(y, x):
                return False
    return True


def reversibility_transfer(chain: PartitionedChain) -> TransferReport:
    """Check mu reversible for Q and mu_1 reversible for the projection."""
    upstream = _is_reversible(chain.kernel, chain.invariant)
    result = project(chain)
    projected = _is_reversible(result.kernel, result.mu1)
    return TransferReport(upstream_reversible=upstream, projected_reversible=projected)


def dynkin_check(chain: PartitionedChain) -> dict[tuple[Hashable, Hashable], bool]:
    """Is Q(w, A_{v'}) constant over w in A_v, for every block pair (v, v')?

    When every entry is True the projected kernel coincides with the
    classical lumped chain.
    """
    members = chain.block_members()
    ids = chain.block_ids()
    out: dict[tuple[Hashable, Hashable], bool] = {}
    for v in ids:
        row_masses = []
        for w in members[v]:
            acc: dict[Hashable, Fraction] = defaultdict(Fraction)
            for w2, q in chain.kernel.row(w).items():
                acc[chain.blocks[w2]] += q
            row_masses.append(acc)
        for v2 in ids:
            vals = {m.get(v2, Fraction(0)) for m in row_masses}
            out[(v, v2)] = len(vals) == 1
    return out


# ---------------------------------------------------------------------------
# symmetric-group instances
# ---------------------------------------------------------------------------

def transposition_walk(N: int, guard: int = 8) -> StochasticKernel:
    """The random-transposition walk on S_N: T(sigma, tau sigma) = 2/(N(N-1))."""
    if N < 2:
        raise ValueError("N must be >= 2")
    check_guard(N, guard, "transposition_walk")
    states = tuple(iter_permutations(N))
    weight = Fraction(2, N * (N - 1))
    rows = []
    for sigma in states:
        row: dict[tuple[int, ...], Fraction] = {}
        for a in range(N):
            for b in range(a + 1, N):
                row[apply_transposition(sigma, a, b)] = weight
        rows.append(row)
    return StochasticKernel(states, tuple(rows), label=f"T_{N}")


def uniform_on_permutations(N: int) -> dict[tuple[int, ...], Fraction]:
    w = Fraction(1, math.factorial(N))
    return {sigma: w for sigma in iter_permutations(N)}


def _split_pair_count(length: int, part: int) -> int:
    """Transposition pairs inside one cycle of the given length producing the
    split {part, length - part}: length pairs when the parts differ, length/2
    when the cycle splits evenly."""
    other = length - part
    if part > other:
        return 0
    return length // 2 if part == other else length


def _cycle_type_row(ct: CycleType) -> dict[CycleType, Fraction]:
    """Direct case analysis of one random-transposition move on a cycle type."""
    N = ct.N
    counts = ct.counts
    den = N * (N - 1)  # probabilities are 2 * (pair count) / (N(N-1))
    row: dict[CycleType, Fraction] = defaultdict(Fraction)

    def bump(new_counts: list[int], pairs: int) -> None:
        if pairs:
            row[CycleType(tuple(new_counts))] += Fraction(2 * pairs, den)

    # merge two cycles of lengths l != m
    for l in range(1, N + 1):
        if counts[l - 1] == 0:
            continue
        for m in range(l + 1, N + 1):
            if counts[m - 1] == 0:
                continue
            pairs = l * counts[l - 1] * m * counts[m - 1]
            nc = list(counts)
            nc[l - 1] -= 1
            nc[m - 1] -= 1
            nc[l + m - 1] += 1
            bump(nc, pairs)
        # merge two distinct cycles of the same length l
        if counts[l - 1] >= 2 and 2 * l <= N:
            pairs = counts[l - 1] * (counts[l - 1] - 1) // 2 * l * l
            nc = list(counts)
            nc[l - 1] -= 2
            nc[2 * l - 1] += 1
            bump(nc, pairs)
    # split one cycle of length l >= 2 into {a, l - a}
    for l in range(2, N + 1):
        if counts[l - 1] == 0:
            continue
        for a in range(1, l // 2 + 1):
            pairs = counts[l - 1] * _split_pair_count(l, a)
            nc = list(counts)
            nc[l - 1] -= 1
            nc[a - 1] += 1
            nc[l - a - 1] += 1
            bump(nc, pairs)

    total = sum(row.values(), Fraction(0))
    row[ct] += 1 - total
    return {t: w for t, w in row.items() if w != 0}


def cycle_type_chain(N: int, guard: int = 8) -> PartitionedChain:
    """The coagulation-fragmentation chain on cycle types of S_N.

    Built two independent ways and cross-checked entry by entry: (a) lumping
    the transposition walk by cycle type, after verifying the Dynkin
    condition really holds across each conjugacy class, and (b) the direct
    merge/split case analysis.  Any discrepancy is a hard failure.  The
    result carries the class-size invariant law and the eta_1 partition.
    """
    check_guard(N, guard, "cycle_type_chain")
    types = all_cycle_types(N)

    # route (a): lump the walk over S_N by conjugacy class
    walk = transposition_walk(N, guard=guard)
    lumped: dict[CycleType, dict[CycleType, Fraction]] = {}
    for sigma in walk.states:
        ct = CycleType.of_permutation(sigma)
        acc: dict[CycleType, Fraction] = defaultdict(Fraction)
        for sigma2, q in walk.row(sigma).items():
            acc[CycleType.of_permutation(sigma2)] += q
        acc = {t: w for t, w in acc.items() if w != 0}
        if ct in lumped:
            if lumped[ct] != acc:
                raise RuntimeError(
                    f"Dynkin condition fails within class {ct}: rows differ"
                )
        else:
            lumped[ct] = acc

    # route (b): direct case analysis
    for ct in types:
        direct = _cycle_type_row(ct)
        if direct != lumped[ct]:
            raise RuntimeError(
                f"cycle-type kernel disagreement at {ct}: lumped {lumped[ct]}, "
                f"case analysis {direct}"
            )

    kernel = StochasticKernel(
        tuple(types), tuple(lumped[t] for t in types), label=f"Q_cycle_{N}"
    )
    invariant = {t: t.class_weight() for t in types}
    blocks = {t: t.fixed_points for t in types}
    return PartitionedChain(kernel=kernel, invariant=invariant, blocks=blocks)


def permutation_chain(N: int, guard: int = 8) -> PartitionedChain:
    """The transposition walk with the uniform law, partitioned by cycle type."""
    walk = transposition_walk(N, guard=guard)
    return PartitionedChain(
        kernel=walk,
        invariant=uniform_on_permutations(N),
        blocks={sigma: CycleType.of_permutation(sigma) for sigma in walk.states},
    )
