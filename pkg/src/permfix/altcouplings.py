"""Two alternative couplings of the fixed-point law with Poisson(1).

The Mallows construction: independent bits X_n with P[X_n = 1] = 1/n (so
X_1 == 1) and

    S_N     = X_1 X_2 + X_2 X_3 + ... + X_{N-1} X_N + X_N
    S_inf   = X_1 X_2 + X_2 X_3 + ...

couple pi_N with Poisson(1), but the pair disagrees with probability of
order 1/N.  The ascent/peak construction: from i.i.d. uniforms U_1, U_2, ...

    S = min{n >= 1 : U_n < U_{n+1}}          (first ascent)
    T = min{n >= 2 : U_n > max(U_{n-1}, U_{n+1})}   (first peak)
    M = S - 1{T - S odd}

has M ~ Poisson(1) exactly, while the truncated variant M_N built from
S_N = min(S, N), T_N = min(T, N) has law pi_N; they differ only when a
peak fails to appear by index N, an event of probability at most
2^N / (N+1)!.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations
from typing import Mapping, Sequence

import numpy as np

from .exactdist import ExactDist
from .perms import check_guard
from .rng import Stream, VectorStreams


# ---------------------------------------------------------------------------
# the Mallows bit-chain coupling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MallowsSample:
    """One draw of the truncated bit chain with its two partial sums."""

    bits: tuple[int, ...]  # X_1 .. X_K
    s_n: int
    s_trunc: int
    N: int
    K: int
    tail_bound: Fraction

    def __post_init__(self) -> None:
        b = self.bits
        s_n = sum(b[i] * b[i + 1] for i in range(self.N - 1)) + b[self.N - 1]
        s_trunc = sum(b[i] * b[i + 1] for i in range(self.K - 1))
        if (s_n, s_trunc) != (self.s_n, self.s_trunc):
            raise ValueError("sums do not match the recorded bits")
        if self.tail_bound < Fraction(1, self.K + 1):
            raise ValueError("tail bound below sum_{k>K} 1/(k(k+1))")


def mallows_sample(N: int, K: int, stream: Stream) -> MallowsSample:
    """Draw X_1..X_K and both sums; truncation error bound is 1/K."""
    if K < N + 1:
        raise ValueError("K must be at least N + 1")
    bits = [1]
    for n in range(2, K + 1):
        bits.append(1 if stream.uniform() < 1.0 / n else 0)
    b = tuple(bits)
    s_n = sum(b[i] * b[i + 1] for i in range(N - 1)) + b[N - 1]
    s_trunc = sum(b[i] * b[i + 1] for i in range(K - 1))
    return MallowsSample(
        bits=b, s_n=s_n, s_trunc=s_trunc, N=N, K=K, tail_bound=Fraction(1, K)
    )


def mallows_exact_pmf(N: int) -> ExactDist:
    """Exact law of S_N by dynamic programming over (last bit, partial sum).

    Must coincide with the fixed-point law pi_N; the test suite enforces it.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    # state: (last bit value, sum of adjacent products so far)
    dist: dict[tuple[int, int], Fraction] = {(1, 0): Fraction(1)}  # X_1 == 1
    for n in range(2, N + 1):
        p_one = Fraction(1, n)
        nxt: dict[tuple[int, int], Fraction] = {}
        for (prev, acc), w in dist.items():
            for bit in (0, 1):
                w_bit = w * (p_one if bit else 1 - p_one)
                key = (bit, acc + (prev & bit))
                nxt[key] = nxt.get(key, Fraction(0)) + w_bit
        dist = nxt
    law: dict[int, Fraction] = {}
    for (last, acc), w in dist.items():
        s = acc + last
        law[s] = law.get(s, Fraction(0)) + w
    return ExactDist.from_mapping(law, label=f"mallows_S_{N}")


@dataclass(frozen=True)
class MallowsDiscrepancy:
    N: int
    K: int
    replicas: int
    estimate: float
    sigma: float
    tail_bound: Fraction


def mallows_discrepancy(N: int, replicas: int, K: int, seed: int) -> MallowsDiscrepancy:
    """Monte Carlo estimate of P[S_N != S_inf], truncating the series at K.

    The truncation can misclassify a replica only if some product
    X_k X_{k+1} with k >= K is one; that has probability at most
    sum_{k >= K} 1/(k(k+1)) = 1/K, reported as tail_bound.
    """
    if K < N + 1:
        raise ValueError("K must be at least N + 1")
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    streams = VectorStreams(seed, 0, replicas)
    prev = np.ones(replicas, dtype=bool)  # X_1 == 1
    s_n = np.zeros(replicas, dtype=np.int64)
    s_trunc = np.zeros(replicas, dtype=np.int64)
    x_n = None
    for n in range(2, K + 1):
        bit = streams.uniforms() < 1.0 / n
        prod = prev & bit
        s_trunc += prod
        if n <= N:
            s_n += prod
        if n == N:
            x_n = bit.copy()
        prev = bit
    assert x_n is not None
    s_n += x_n
    p_hat = float(np.count_nonzero(s_n != s_trunc)) / replicas
    sigma = math.sqrt(p_hat * (1.0 - p_hat) / replicas)
    return MallowsDiscrepancy(
        N=N, K=K, replicas=replicas, estimate=p_hat, sigma=sigma,
        tail_bound=Fraction(1, K),
    )


# ---------------------------------------------------------------------------
# the ascent/peak coupling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AscentPeakSample:
    """First ascent S, first peak T, and M = S - 1{T - S odd}."""

    s: int
    t: int
    uniforms_used: int

    @property
    def m(self) -> int:
        return self.s - ((self.t - self.s) % 2)

    def truncated(self, N: int) -> tuple[int, int, int]:
        """(S_N, T_N, M_N) with S_N = min(S, N), T_N = min(T, N)."""
        s_n = min(self.s, N)
        t_n = min(self.t, N)
        return s_n, t_n, s_n - ((t_n - s_n) % 2)


class TieEncountered(RuntimeError):
    """Two uniforms compared exactly equal (probability zero event)."""


def ascent_peak_from_uniforms(us: Sequence[float]) -> AscentPeakSample:
    """Evaluate S and T on a given uniform sequence (must be long enough)."""
    s = t = None
    n = 1
    while s is None or t is None:
        if n + 1 >= len(us) + 1:
            raise ValueError("uniform sequence exhausted before S and T were set")
        u_prev = us[n - 2] if n >= 2 else None
        u_n, u_next = us[n - 1], us[n]
        if u_n == u_next or (u_prev is not None and u_prev == u_n):
            raise TieEncountered(f"tie at index {n}")
        if s is None and u_n < u_next:
            s = n
        if t is None and n >= 2 and u_n > u_prev and u_n > u_next:
            t = n
        n += 1
    return AscentPeakSample(s=s, t=t, uniforms_used=max(s + 1, t + 1))


def ascent_peak_sample(seed: int, replica: int = 0) -> AscentPeakSample:
    """Lazily consume one uniform stream until both S and T are determined."""
    stream = Stream(seed, replica)
    us = [stream.uniform(), stream.uniform()]
    while True:
        try:
            return ascent_peak_from_uniforms(us)
        except ValueError:
            us.append(stream.uniform())


@dataclass(frozen=True)
class AscentPeakBatch:
    """Empirical laws of M and of the truncated M_N for each requested N."""

    samples: int
    ties: int
    m_counts: Mapping[int, int]
    m_n_counts: Mapping[int, Mapping[int, int]]
    disagree: Mapping[int, int]  # count of M != M_N per N

    def m_pmf(self) -> dict[int, float]:
        return {k: v / self.samples for k, v in sorted(self.m_counts.items())}

    def m_n_pmf(self, N: int) -> dict[int, float]:
        return {k: v / self.samples for k, v in sorted(self.m_n_counts[N].items())}

    def disagree_rate(self, N: int) -> float:
        return self.disagree[N] / self.samples


def ascent_peak_batch(
    samples: int, seed: int, ns: Sequence[int] = (), max_columns: int = 64
) -> AscentPeakBatch:
    """Vectorized batch sampling of (S, T) over many replicas.

    Uniforms are consumed column by column from per-replica streams until
    every replica has resolved both S and T; ties abort the replica and are
    counted (53-bit uniforms make them astronomically unlikely).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    streams = VectorStreams(seed, 0, samples)
    s_val = np.zeros(samples, dtype=np.int64)
    t_val = np.zeros(samples, dtype=np.int64)
    tie = np.zeros(samples, dtype=bool)

    u_prev = None
    u_curr = streams.uniforms()
    n = 1
    while n < max_columns:
        u_next = streams.uniforms()
        tie |= u_curr == u_next
        asc = (s_val == 0) & (u_curr < u_next)
        s_val[asc] = n
        if n >= 2:
            peak = (t_val == 0) & (u_curr > u_prev) & (u_curr > u_next)
            t_val[peak] = n
        u_prev = u_curr
        u_curr = u_next
        n += 1
        if np.all(((s_val > 0) & (t_val > 0)) | tie):
            break
    else:
        raise RuntimeError(f"S or T unresolved after {max_columns} uniforms")

    ok = ~tie
    ties = int(np.count_nonzero(tie))
    s_ok = s_val[ok]
    t_ok = t_val[ok]
    m = s_ok - ((t_ok - s_ok) % 2)
    m_counts = Counter(m.tolist())
    m_n_counts: dict[int, Counter] = {}
    disagree: dict[int, int] = {}
    for N in ns:
        s_n = np.minimum(s_ok, N)
        t_n = np.minimum(t_ok, N)
        m_n = s_n - ((t_n - s_n) % 2)
        m_n_counts[N] = Counter(m_n.tolist())
        disagree[N] = int(np.count_nonzero(m_n != m))
    return AscentPeakBatch(
        samples=int(np.count_nonzero(ok)),
        ties=ties,
        m_counts=dict(m_counts),
        m_n_counts={N: dict(c) for N, c in m_n_counts.items()},
        disagree=disagree,
    )


def peak_tail_exact(N: int, guard: int = 10) -> Fraction:
    """Exact P[T > N] by enumerating the (N+1)! relative orderings.

    T depends only on the relative order of U_1..U_{N+1}; T > N means no
    interior index n in [2, N] is a local maximum.  The count is verified
    against the bound 2^N / (N+1)! before returning.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    check_guard(N, guard, "peak_tail_exact")
    m = N + 1
    count = 0
    for perm in permutations(range(m)):
        for i in range(1, m - 1):
            if perm[i - 1] < perm[i] > perm[i + 1]:
                break
        else:
            count += 1
    prob = Fraction(count, math.factorial(m))
    if prob > Fraction(2 ** N, math.factorial(N + 1)):
        raise AssertionError("enumerated P[T > N] exceeds 2^N/(N+1)!")
    return prob


def empirical_half_tv(pmf_counts: Mapping[int, int], samples: int, reference: ExactDist) -> float:
    """Half-convention distance between an empirical law and an exact one."""
    points = set(pmf_counts) | set(reference.support)
    total = 0.0
    for x in points:
        diff = pmf_counts.get(x, 0) / samples - float(reference.pmf(x))
        if diff > 0:
            total += diff
    return total
