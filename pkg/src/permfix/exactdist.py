"""Exact laws on the non-negative integers and their distances.

Everything here is computed in rational arithmetic.  The only transcendental
constant that ever enters is e^{-1}; it is carried around as an exact rational
enclosure (an interval whose endpoints are consecutive partial sums of the
alternating series sum (-1)^k / k!), so every comparison against an analytic
bound can be certified rather than merely observed in floating point.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Union

import mpmath


class PrecisionInsufficient(ArithmeticError):
    """Raised when a requested quantity is not resolved at the working precision."""


# ---------------------------------------------------------------------------
# rational interval arithmetic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] with exact rational endpoints."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValueError(f"empty interval: [{self.lo}, {self.hi}]")

    @staticmethod
    def point(value: Fraction | int) -> "Interval":
        v = Fraction(value)
        return Interval(v, v)

    def __add__(self, other: "Interval | Fraction | int") -> "Interval":
        if isinstance(other, Interval):
            return Interval(self.lo + other.lo, self.hi + other.hi)
        return Interval(self.lo + other, self.hi + other)

    __radd__ = __add__

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other: "Interval | Fraction | int") -> "Interval":
        return self + (-other if isinstance(other, Interval) else Interval.point(-other))

    def __rsub__(self, other: "Fraction | int") -> "Interval":
        return Interval.point(other) + (-self)

    def scale(self, factor: Fraction | int) -> "Interval":
        """Multiply by an exact scalar (sign-aware)."""
        f = Fraction(factor)
        a, b = self.lo * f, self.hi * f
        return Interval(min(a, b), max(a, b))

    def __abs__(self) -> "Interval":
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return Interval(Fraction(0), max(-self.lo, self.hi))

    def positive_part(self) -> "Interval":
        zero = Fraction(0)
        return Interval(max(self.lo, zero), max(self.hi, zero))

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def __float__(self) -> float:
        return float(self.midpoint)

    def certainly_le(self, bound: Fraction | int) -> bool:
        return self.hi <= bound

    def certainly_ge(self, bound: Fraction | int) -> bool:
        return self.lo >= bound

    def certainly_within(self, lo: Fraction | int, hi: Fraction | int) -> bool:
        return self.certainly_ge(lo) and self.certainly_le(hi)


@lru_cache(maxsize=None)
def inv_e_interval(digits: int = 50) -> Interval:
    """Rational enclosure of e^{-1} of width below 10^-digits.

    Consecutive partial sums of sum_k (-1)^k / k! bracket e^{-1} from
    alternating sides, so the last two partial sums are exact rational
    bounds once the next term drops below the target width.
    """
    if digits < 1:
        raise ValueError("digits must be >= 1")
    target = Fraction(1, 10 ** digits)
    s = Fraction(0)
    prev = s
    k = 0
    fact = 1
    while True:
        prev = s
        s += Fraction((-1) ** k, fact)
        k += 1
        fact *= k
        if k >= 3 and Fraction(1, fact) < target:
            s_next = s + Fraction((-1) ** k, fact)
            lo, hi = sorted((s, s_next))
            return Interval(lo, hi)


# ---------------------------------------------------------------------------
# derangement numbers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DerangementTable:
    """Exact derangement counts D_0 .. D_max.

    Built by the iteration D_n = (n-1)(D_{n-1} + D_{n-2}) and verified
    against the alternating sum D_n = n! sum_{k<=n} (-1)^k / k!.
    """

    values: tuple[int, ...]

    def __post_init__(self) -> None:
        v = self.values
        if not v or v[0] != 1:
            raise ValueError("D_0 must be 1")
        if len(v) >= 2 and v[1] != 0:
            raise ValueError("D_1 must be 0")
        fact = 1
        alt = Fraction(0)
        for n, d in enumerate(v):
            if n > 0:
                fact *= n
            alt = sum(Fraction((-1) ** k, math.factorial(k)) for k in range(n + 1))
            if Fraction(d) != fact * alt:
                raise ValueError(f"D_{n} fails the alternating-sum identity")
            if n >= 2 and d != (n - 1) * (v[n - 1] + v[n - 2]):
                raise ValueError(f"D_{n} fails the two-term recurrence")

    def __getitem__(self, n: int) -> int:
        return self.values[n]

    def __len__(self) -> int:
        return len(self.values)


def derangements(n_max: int) -> DerangementTable:
    """Exact table D_0 .. D_{n_max} of derangement numbers."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    vals = [1, 0]
    for n in range(2, n_max + 1):
        vals.append((n - 1) * (vals[n - 1] + vals[n - 2]))
    return DerangementTable(tuple(vals[: n_max + 1]))


# ---------------------------------------------------------------------------
# exact finitely supported distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExactDist:
    """Finitely supported probability law on Z+ with exact rational weights.

    Zero-weight points are dropped from the support, so the support is the
    strictly increasing list of atoms; queries outside it return 0.
    """

    support: tuple[int, ...]
    weights: tuple[Fraction, ...]
    label: str = ""

    def __post_init__(self) -> None:
        if len(self.support) != len(self.weights):
            raise ValueError("support/weights length mismatch")
        if any(x < 0 for x in self.support):
            raise ValueError("support must consist of non-negative integers")
        if any(self.support[i] >= self.support[i + 1] for i in range(len(self.support) - 1)):
            raise ValueError("support must be strictly increasing")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be non-negative")
        if sum(self.weights, Fraction(0)) != 1:
            raise ValueError("weights must sum exactly to 1")

    @staticmethod
    def from_mapping(weights: Mapping[int, Fraction], label: str = "") -> "ExactDist":
        items = sorted((x, Fraction(w)) for x, w in weights.items() if w != 0)
        return ExactDist(
            tuple(x for x, _ in items), tuple(w for _, w in items), label=label
        )

    def pmf(self, x: int) -> Fraction:
        try:
            return self.weights[self.support.index(x)]
        except ValueError:
            return Fraction(0)

    def as_dict(self) -> dict[int, Fraction]:
        return dict(zip(self.support, self.weights))

    def restrict(self, lo: int, hi: int, label: str = "") -> "ExactDist":
        """Condition on the window [lo, hi] (exact renormalization)."""
        kept = {x: w for x, w in self.as_dict().items() if lo <= x <= hi}
        mass = sum(kept.values(), Fraction(0))
        if mass == 0:
            raise ValueError("conditioning on a null event")
        return ExactDist.from_mapping(
            {x: w / mass for x, w in kept.items()}, label=label or f"{self.label}|[{lo},{hi}]"
        )

    def cumulative(self) -> tuple[Fraction, ...]:
        out = []
        acc = Fraction(0)
        for w in self.weights:
            acc += w
            out.append(acc)
        return tuple(out)

    def quantile(self, u: Fraction) -> int:
        """Smallest x in the support with CDF(x) > u (inverse-CDF sampling)."""
        for x, c in zip(self.support, self.cumulative()):
            if u < c:
                return x
        return self.support[-1]

    def to_json_dict(self, precision_digits: int | None = None) -> dict:
        return {
            "label": self.label,
            "entries": [
                {"x": x, "num": w.numerator, "den": w.denominator}
                for x, w in zip(self.support, self.weights)
            ],
            "precision_digits": precision_digits,
        }

    @staticmethod
    def from_json_dict(data: dict) -> "ExactDist":
        return ExactDist.from_mapping(
            {e["x"]: Fraction(e["num"], e["den"]) for e in data["entries"]},
            label=data.get("label", ""),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def fixed_point_pmf(N: int) -> ExactDist:
    """Law of the number of fixed points of a uniform permutation of N items.

    pi(x) = D_{N-x} / ((N-x)! x!); the impossible value N-1 carries weight 0
    and is omitted from the support.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    table = derangements(N)
    weights = {
        x: Fraction(table[N - x], math.factorial(N - x) * math.factorial(x))
        for x in range(N + 1)
    }
    return ExactDist.from_mapping(weights, label=f"pi_{N}")


def pi_conditioned(N: int) -> ExactDist:
    """The fixed-point law conditioned on [0, N-4]."""
    if N < 5:
        raise ValueError("conditioning needs N >= 5")
    return fixed_point_pmf(N).restrict(0, N - 4, label=f"pi_check_{N}")


# ---------------------------------------------------------------------------
# the Poisson(1) reference
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoissonRef:
    """Poisson(1) reference with weights held as (1/k!) times a shared e^{-1}.

    The coefficients are exact rationals; the transcendental factor enters
    every numeric answer only through inv_e_interval(digits), so distances
    against the reference come back as certified rational intervals.
    """

    k_max: int
    digits: int = 50
    label: str = "poisson(1)"

    def __post_init__(self) -> None:
        if self.k_max < 0:
            raise ValueError("k_max must be >= 0")

    def coefficient(self, k: int) -> Fraction:
        if k < 0:
            return Fraction(0)
        return Fraction(1, math.factorial(k))

    def mass(self, k: int) -> Interval:
        return inv_e_interval(self.digits).scale(self.coefficient(k))

    def partial_coefficient_sum(self, n: int) -> Fraction:
        return sum((self.coefficient(k) for k in range(n + 1)), Fraction(0))

    def tail_mass(self, beyond: int) -> Interval:
        """Enclosure of P[X > beyond] = 1 - e^{-1} sum_{k<=beyond} 1/k!."""
        return Fraction(1) - inv_e_interval(self.digits).scale(
            self.partial_coefficient_sum(beyond)
        )


def poisson_pmf(k_max: int, digits: int = 50) -> PoissonRef:
    """Poisson(1) weights as exact 1/k! coefficients times a shared e^{-1} unit."""
    return PoissonRef(k_max=k_max, digits=digits)


def poisson_truncated(k_max: int, label: str = "") -> ExactDist:
    """Poisson(1) conditioned on [0, k_max]: exactly rational, weights prop. to 1/x!.

    This is the law called zeta when k_max = N - 4.
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    total = sum((Fraction(1, math.factorial(x)) for x in range(k_max + 1)), Fraction(0))
    return ExactDist.from_mapping(
        {x: Fraction(1, math.factorial(x)) / total for x in range(k_max + 1)},
        label=label or f"zeta_[0,{k_max}]",
    )


def zeta_law(N: int) -> ExactDist:
    """Poisson(1) conditioned on [0, N-4]."""
    if N < 4:
        raise ValueError("zeta needs N >= 4")
    return poisson_truncated(N - 4, label=f"zeta_{N}")


# ---------------------------------------------------------------------------
# distances and bounds
# ---------------------------------------------------------------------------

DistLike = Union[ExactDist, PoissonRef]

_CONVENTIONS = ("half", "total")


def tv_distance(d1: DistLike, d2: DistLike, convention: str) -> Fraction | Interval:
    """Total variation distance between two laws.

    convention="half"  -> sum_x (d1 - d2)_+
    convention="total" -> sum_x |d1 - d2|  (twice the half value)

    Exact Fraction when both inputs are ExactDist; a certified Interval when
    the Poisson reference (carrying e^{-1}) is involved.  The convention is
    mandatory because the two differ by a factor of two and the literature
    mixes them.
    """
    if convention not in _CONVENTIONS:
        raise ValueError(f"convention must be one of {_CONVENTIONS}")
    if isinstance(d1, ExactDist) and isinstance(d2, ExactDist):
        total = Fraction(0)
        points = sorted(set(d1.support) | set(d2.support))
        for x in points:
            diff = d1.pmf(x) - d2.pmf(x)
            if convention == "half":
                if diff > 0:
                    total += diff
            else:
                total += abs(diff)
        return total

    if isinstance(d1, PoissonRef) and isinstance(d2, PoissonRef):
        raise ValueError("at least one argument must be an ExactDist")
    if isinstance(d1, PoissonRef):
        d1, d2 = d2, d1
        if convention == "half":
            # (P - d)_+ = (d - P)_+ + (P - d) summed; easier to flip via total
            total_iv = tv_distance(d1, d2, "total")
            half_other = tv_distance(d1, d2, "half")
            assert isinstance(total_iv, Interval) and isinstance(half_other, Interval)
            return total_iv - half_other
    assert isinstance(d1, ExactDist) and isinstance(d2, PoissonRef)

    top = d1.support[-1] if d1.support else 0
    acc = Interval.point(0)
    for x in range(top + 1):
        diff = Interval.point(d1.pmf(x)) - d2.mass(x)
        acc = acc + (diff.positive_part() if convention == "half" else abs(diff))
    if convention == "total":
        # everything beyond the support of d1 is pure Poisson mass
        acc = acc + d2.tail_mass(top)
    return acc


def tv_bracket(N: int) -> tuple[Fraction, Fraction]:
    """Exact bracket for the total-convention distance between pi_N and Poisson(1).

    lower = N/(N+2) * 2^{N+1}/(N+1)!,  upper = (2^{N+1} - 1)/(N+1)!.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    fact = math.factorial(N + 1)
    lower = Fraction(N, N + 2) * Fraction(2 ** (N + 1), fact)
    upper = Fraction(2 ** (N + 1) - 1, fact)
    return lower, upper


def log_rate(N: int, convention: str = "total", digits: int | None = None) -> float:
    """ln(TV(pi_N, Poisson(1))) / (N ln N).

    The distance has magnitude about 2^{N+1}/(N+1)!, so resolving it needs
    roughly N log10 N digits of e^{-1}; the default precision grows with N
    accordingly, with a 20-digit guard.
    """
    if N < 4:
        raise ValueError("log_rate needs N >= 4")
    if digits is None:
        digits = max(50, math.ceil(N * math.log10(N)) + 20)
    tv = tv_distance(fixed_point_pmf(N), poisson_pmf(N, digits=digits), convention)
    assert isinstance(tv, Interval)
    if tv.lo <= 0:
        raise PrecisionInsufficient(
            f"TV for N={N} not resolved away from zero at {digits} digits"
        )
    with mpmath.workdps(digits + 15):
        lo = mpmath.log(mpmath.mpf(tv.lo.numerator) / tv.lo.denominator)
        hi = mpmath.log(mpmath.mpf(tv.hi.numerator) / tv.hi.denominator)
        denom = N * mpmath.log(N)
        return float((lo + hi) / 2 / denom)


def separation_discrepancy(d1: DistLike, d2: DistLike) -> Fraction | Interval:
    """sup_x (1 - d1(x)/d2(x)).

    Points with d2 = 0 = d1 are ignored; d2 = 0 < d1 contributes the value 1.
    Against the Poisson reference (positive everywhere) any point outside the
    support of d1 forces the supremum to its maximal value 1.
    """
    if isinstance(d2, PoissonRef):
        if not isinstance(d1, ExactDist):
            raise ValueError("d1 must be an ExactDist")
        top = d1.support[-1]
        if set(d1.support) != set(range(top + 1)):
            return Fraction(1)  # a gap in the support: 1 - 0/P(x) = 1
        # d1 is finitely supported while the reference never vanishes,
        # so the tail always realizes the supremum.
        return Fraction(1)
    assert isinstance(d2, ExactDist)
    if not isinstance(d1, ExactDist):
        raise ValueError("d1 must be an ExactDist")
    best: Fraction | None = None
    for x in sorted(set(d1.support) | set(d2.support)):
        w2 = d2.pmf(x)
        w1 = d1.pmf(x)
        if w2 == 0:
            if w1 == 0:
                continue
            value = Fraction(1)
        else:
            value = 1 - w1 / w2
        if best is None or value > best:
            best = value
    return best if best is not None else Fraction(0)


def separation_ratio_term(N: int, x: int, digits: int = 50) -> Interval:
    """Enclosure of 1 - pi_N(x) / P(x) = 1 - e * D_{N-x} / (N-x)!.

    Pins down the sign of the conditioned-law separation at the boundary
    indices: at x = N-4 this equals 1 - 9e/24 < 0, while at x = N-3 it
    equals 1 - e/3 > 0.
    """
    pi = fixed_point_pmf(N)
    inv_e = inv_e_interval(digits)
    coeff = Fraction(1, math.factorial(x))
    # 1 - pi(x)/(e^{-1}/x!) = 1 - pi(x) x! / e^{-1}; bound via interval division
    ratio_lo = pi.pmf(x) / coeff / inv_e.hi
    ratio_hi = pi.pmf(x) / coeff / inv_e.lo
    return Interval(1 - ratio_hi, 1 - ratio_lo)
