"""Moment identities and the Gram apparatus for functions of the fixed-point count.

F_k denotes the falling-factorial statistic eta_1 (eta_1 - 1) ... (eta_1 - k + 1),
which is also the number of ordered k-tuples of distinct fixed points.  Its
expectation under the uniform law is 1 for every k <= N, the mixed moments
E[F_k F_l] form an explicit integer Gram matrix, and solving two linear
systems against it reconstructs the conditional two-cycle mean exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .exactdist import Interval, fixed_point_pmf, inv_e_interval
from .kernels import p_closedform, state_space
from .perms import check_guard, eta1, eta2, iter_permutations


def bell_numbers(k_max: int) -> list[int]:
    """Bell numbers B_0..B_{k_max} by the Bell triangle (exact integers)."""
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    bells = [1]
    row = [1]
    for _ in range(k_max):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
        bells.append(row[0])
    return bells[: k_max + 1]


def falling_factorial(x: int, k: int) -> int:
    out = 1
    for i in range(k):
        out *= x - i
    return out


def falling_moment(N: int, k: int) -> Fraction:
    """E[F_k] under pi_N, computed from the exact law; equals 1 for k <= N."""
    if not 0 <= k <= N:
        raise ValueError("need 0 <= k <= N")
    pi = fixed_point_pmf(N)
    return sum(
        (w * falling_factorial(x, k) for x, w in pi.as_dict().items()), Fraction(0)
    )


def raw_moment_equality(N: int, k: int) -> tuple[Fraction, int, bool]:
    """(E[X^k] under pi_N, k-th Bell number, equal?).

    The Bell number is the k-th raw moment of Poisson(1); the two agree for
    all k <= N and must differ at k = N + 1.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    pi = fixed_point_pmf(N)
    moment = sum((w * x ** k for x, w in pi.as_dict().items()), Fraction(0))
    bell = bell_numbers(k)[k]
    return moment, bell, moment == bell


def eta2_fk(N: int, k: int, method: str = "closed", guard: int = 8) -> Fraction:
    """E[eta_2 F_k] under the uniform law on S_N.

    Closed value: 1/2 for k <= N-2 and 0 for k in {N-1, N}.  The bruteforce
    method sums over all of S_N (guarded) and must reproduce it.
    """
    if not 0 <= k <= N:
        raise ValueError("need 0 <= k <= N")
    if method == "closed":
        return Fraction(1, 2) if k <= N - 2 else Fraction(0)
    if method == "bruteforce":
        check_guard(N, guard, "eta2_fk bruteforce")
        total = 0
        for perm in iter_permutations(N):
            total += eta2(perm) * falling_factorial(eta1(perm), k)
        return Fraction(total, math.factorial(N))
    raise ValueError("method must be 'closed' or 'bruteforce'")


# ---------------------------------------------------------------------------
# Gram matrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GramMatrix:
    """G_{k,l} = E[F_k F_l] for k, l in V, as exact integers.

    Symmetric with first row identically 1 (F_0 == 1 and E[F_l] = 1); the
    F_k are linearly independent on the N-point support, so G is invertible.
    """

    N: int
    indices: tuple[int, ...]
    entries: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self) -> None:
        n = len(self.indices)
        if len(self.entries) != n or any(len(r) != n for r in self.entries):
            raise ValueError("entries must be square over the index list")
        for i in range(n):
            for j in range(n):
                if self.entries[i][j] != self.entries[j][i]:
                    raise ValueError("Gram matrix must be symmetric")
        if any(self.entries[0][j] != 1 for j in range(n)):
            raise ValueError("row k=0 must be identically 1")

    def entry(self, k: int, l: int) -> Fraction:
        return self.entries[self.indices.index(k)][self.indices.index(l)]


def gram(N: int) -> GramMatrix:
    """Closed-form Gram matrix: G_{k,l} = k! sum_{r=0}^{k ^ (N-l)} C(l, k-r)/r! for k <= l."""
    if N < 1:
        raise ValueError("N must be >= 1")
    idx = state_space(N)
    entries = []
    for k in idx:
        row = []
        for l in idx:
            a, b = min(k, l), max(k, l)
            val = sum(
                Fraction(math.factorial(a), math.factorial(r)) * math.comb(b, a - r)
                for r in range(0, min(a, N - b) + 1)
            )
            row.append(Fraction(val))
        entries.append(tuple(row))
    return GramMatrix(N=N, indices=idx, entries=tuple(entries))


def gram_bruteforce(N: int, guard: int = 7) -> GramMatrix:
    """E[F_k F_l] by enumeration of S_N (the oracle for the closed form)."""
    check_guard(N, guard, "gram_bruteforce")
    idx = state_space(N)
    hist: dict[int, int] = {}
    for perm in iter_permutations(N):
        x = eta1(perm)
        hist[x] = hist.get(x, 0) + 1
    total = math.factorial(N)
    entries = []
    for k in idx:
        row = []
        for l in idx:
            val = sum(
                Fraction(c, total) * falling_factorial(x, k) * falling_factorial(x, l)
                for x, c in hist.items()
            )
            row.append(val)
        entries.append(tuple(row))
    return GramMatrix(N=N, indices=idx, entries=tuple(entries))


def solve_exact(matrix: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]) -> list[Fraction]:
    """Exact rational Gaussian elimination with partial (first nonzero) pivoting."""
    n = len(matrix)
    aug = [[Fraction(v) for v in row] + [Fraction(rhs[i])] for i, row in enumerate(matrix)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            raise ZeroDivisionError("singular matrix")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [v * inv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [vr - factor * vc for vr, vc in zip(aug[r], aug[col])]
    return [aug[i][n] for i in range(n)]


@dataclass(frozen=True)
class CoefficientSystems:
    """Solutions of the two Gram systems and the function they reconstruct.

    G a = (1, ..., 1, 0)  reconstructs f = 2p as sum_k a_k F_k,
    G b = (1, ..., 1)     reconstructs the constant function 1,
    c = a - b             expands g = f - 1,
    and needed_functional encloses sum_{x <= N-2} |g(x)| / (e x!).
    """

    N: int
    indices: tuple[int, ...]
    a: tuple[Fraction, ...]
    b: tuple[Fraction, ...]
    c: tuple[Fraction, ...]
    f_values: dict[int, Fraction]
    needed_functional: Interval


def coefficient_systems(N: int, digits: int = 50) -> CoefficientSystems:
    """Solve the Gram systems and verify f = 2p exactly on V."""
    if N < 4:
        raise ValueError("N must be >= 4")
    G = gram(N)
    idx = G.indices
    ones_zero = [Fraction(1)] * (len(idx) - 1) + [Fraction(0)]  # 2 E[eta_2 F_k] on V
    ones = [Fraction(1)] * len(idx)
    a = solve_exact(G.entries, ones_zero)
    b = solve_exact(G.entries, ones)
    c = [ai - bi for ai, bi in zip(a, b)]

    p = p_closedform(N)
    f_values: dict[int, Fraction] = {}
    for x in idx:
        fx = sum((ak * falling_factorial(x, k) for ak, k in zip(a, idx)), Fraction(0))
        if fx != 2 * p[x]:
            raise AssertionError(f"reconstructed f({x}) = {fx} != 2 p({x}) = {2 * p[x]}")
        one = sum((bk * falling_factorial(x, k) for bk, k in zip(b, idx)), Fraction(0))
        if one != 1:
            raise AssertionError(f"b-coefficients fail to reconstruct 1 at x={x}")
        f_values[x] = fx

    rational_sum = sum(
        (abs(f_values[x] - 1) * Fraction(1, math.factorial(x)) for x in range(N - 1)),
        Fraction(0),
    )
    functional = inv_e_interval(digits).scale(rational_sum)
    return CoefficientSystems(
        N=N,
        indices=idx,
        a=tuple(a),
        b=tuple(b),
        c=tuple(c),
        f_values=f_values,
        needed_functional=functional,
    )


def alternating_partial_sum(n: int) -> Fraction:
    """sum_{l<=n} (-1)^l / l!; lies in [1/3, 1/2] for n >= 2."""
    return sum((Fraction((-1) ** l, math.factorial(l)) for l in range(n + 1)), Fraction(0))
