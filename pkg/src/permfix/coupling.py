"""Monotone coupling of the restricted birth-and-death chains on [0, N-4].

Two chains X (kernel P_check, reversible law pi_check) and Y (kernel R,
reversible law zeta) are driven by one shared uniform per step,

    x' = x - 1  if u < K(x, x-1)
    x' = x      if u < K(x, x-1) + K(x, x)
    x' = x + 1  otherwise,

together with the event counters Z (meetings that split), Z-tilde
(order violations downward) and Z-hat (order violations upward), the
coupling time tau and the hitting times of zero.  The production engine is
vectorized over replicas in double precision with thresholds rounded once
from the exact kernels; an exact-rational scalar engine with the same
uniform streams validates it on small runs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import mpmath
import numpy as np

from .exactdist import ExactDist, pi_conditioned, tv_distance, zeta_law
from .kernels import StochasticKernel, birth_death_stationary, build_restricted
from .rng import Stream, VectorStreams

SELECTORS = ("pcheck-r", "r-r", "pcheck-rtilde")
PRECISIONS = ("double", "exact")
START_MODES = ("shared", "independent", "copy_x")
STAT_NAMES = ("neq", "tau_gt", "z_pos", "ztilde_pos", "zhat_pos", "tau0x_gt", "tau0y_gt")


@dataclass(frozen=True)
class RunConfig:
    """Reproducible description of one coupled simulation."""

    N: int
    horizon: int
    replicas: int
    seed: int
    selector: str = "pcheck-r"
    precision: str = "double"
    start_mode: str = "shared"
    emit_traces: bool = False
    checkpoints: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.N < 5:
            raise ValueError("N must be >= 5 (state space [0, N-4])")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.selector not in SELECTORS:
            raise ValueError(f"selector must be one of {SELECTORS}")
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {PRECISIONS}")
        if self.start_mode not in START_MODES:
            raise ValueError(f"start_mode must be one of {START_MODES}")
        points = sorted(set(self.checkpoints) | {self.horizon})
        if any(p < 0 or p > self.horizon for p in points):
            raise ValueError("checkpoints must lie in [0, horizon]")
        object.__setattr__(self, "checkpoints", tuple(points))


@dataclass(frozen=True)
class CouplingTrace:
    """Per-step record of one coupled trajectory pair."""

    steps: tuple[tuple[int, int, float], ...]  # (x, y, u) before each step
    final: tuple[int, int]
    tau: int | None
    tau0_x: int | None
    tau0_y: int | None
    z_incr: tuple[int, ...]
    ztilde_incr: tuple[int, ...]
    zhat_incr: tuple[int, ...]


@dataclass(frozen=True)
class Aggregates:
    """Counts of the monitored events at one time point."""

    n: int
    replicas: int
    counts: Mapping[str, int]

    def estimate(self, stat: str) -> float:
        return self.counts[stat] / self.replicas

    def sigma(self, stat: str) -> float:
        p = self.estimate(stat)
        return math.sqrt(p * (1.0 - p) / self.replicas)


@dataclass(frozen=True)
class CouplingStats:
    config: RunConfig
    by_time: Mapping[int, Aggregates]
    traces: tuple[CouplingTrace, ...] = ()

    @property
    def final(self) -> Aggregates:
        return self.by_time[self.config.horizon]


def selector_kernels(N: int, selector: str) -> tuple[StochasticKernel, StochasticKernel, ExactDist, ExactDist]:
    """(K_X, K_Y, law of X(0), law of Y(0)) for a selector; stationary starts."""
    p_check, r, r_tilde = build_restricted(N)
    if selector == "pcheck-r":
        return p_check, r, pi_conditioned(N), zeta_law(N)
    if selector == "r-r":
        return r, r, zeta_law(N), zeta_law(N)
    if selector == "pcheck-rtilde":
        return p_check, r_tilde, pi_conditioned(N), birth_death_stationary(r_tilde)
    raise ValueError(f"unknown selector {selector!r}")


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def birth_death_thresholds(kernel: StochasticKernel) -> tuple[list[Fraction], list[Fraction]]:
    """(down, down+stay) cut points per state, exact."""
    if kernel.bandwidth() > 1:
        raise ValueError("monotone stepping needs a birth-and-death kernel")
    down, stay = [], []
    states = kernel.states
    for i, x in enumerate(states):
        d = kernel.entry(x, states[i - 1]) if i > 0 else Fraction(0)
        s = d + kernel.entry(x, x)
        down.append(d)
        stay.append(s)
    return down, stay


def monotone_step(x: int, y: int, u, k_x: StochasticKernel, k_y: StochasticKernel) -> tuple[int, int]:
    """One shared-uniform monotone step of both chains.

    u may be a float or an exact Fraction; comparisons against the exact
    thresholds then decide the move exactly.
    """
    dx, sx = _state_thresholds(k_x, x)
    dy, sy = _state_thresholds(k_y, y)
    return _move(x, u, dx, sx), _move(y, u, dy, sy)


def _state_thresholds(kernel: StochasticKernel, x) -> tuple[Fraction, Fraction]:
    i = kernel.index(x)
    d = kernel.entry(x, kernel.states[i - 1]) if i > 0 else Fraction(0)
    return d, d + kernel.entry(x, x)


def _move(x: int, u, down: Fraction, stay: Fraction) -> int:
    if u < down:
        return x - 1
    if u < stay:
        return x
    return x + 1


# ---------------------------------------------------------------------------
# the vectorized production engine
# ---------------------------------------------------------------------------

def _float_tables(kernel: StochasticKernel) -> tuple[np.ndarray, np.ndarray]:
    down, stay = birth_death_thresholds(kernel)
    return (
        np.array([float(v) for v in down]),
        np.array([float(v) for v in stay]),
    )


def _sample_initial_vector(dist: ExactDist, u: np.ndarray) -> np.ndarray:
    cum = np.array([float(c) for c in dist.cumulative()])
    support = np.array(dist.support, dtype=np.int64)
    return support[np.searchsorted(cum, u, side="right").clip(0, len(support) - 1)]


def _run_block_double(cfg: RunConfig, first: int, count: int) -> dict[int, dict[str, int]]:
    k_x, k_y, law_x, law_y = selector_kernels(cfg.N, cfg.selector)
    down_x, stay_x = _float_tables(k_x)
    down_y, stay_y = _float_tables(k_y)

    streams = VectorStreams(cfg.seed, first, count)
    u0 = streams.uniforms()
    X = _sample_initial_vector(law_x, u0)
    if cfg.start_mode == "shared":
        Y = _sample_initial_vector(law_y, u0)
    elif cfg.start_mode == "independent":
        Y = _sample_initial_vector(law_y, streams.uniforms())
    else:
        Y = X.copy()

    met = X == Y
    hit_x = X == 0
    hit_y = Y == 0
    z_f = np.zeros(count, dtype=bool)
    zt_f = np.zeros(count, dtype=bool)
    zh_f = np.zeros(count, dtype=bool)

    wanted = set(cfg.checkpoints)
    out: dict[int, dict[str, int]] = {}

    def snapshot(n: int) -> None:
        out[n] = {
            "neq": int(np.count_nonzero(X != Y)),
            "tau_gt": int(np.count_nonzero(~met)),
            "z_pos": int(np.count_nonzero(z_f)),
            "ztilde_pos": int(np.count_nonzero(zt_f)),
            "zhat_pos": int(np.count_nonzero(zh_f)),
            "tau0x_gt": int(np.count_nonzero(~hit_x)),
            "tau0y_gt": int(np.count_nonzero(~hit_y)),
        }

    if 0 in wanted:
        snapshot(0)
    for k in range(cfg.horizon):
        u = streams.uniforms()
        eq_b = X == Y
        le_b = X <= Y
        ge_b = X >= Y
        Xn = X + 1 - (u < stay_x[X]) - (u < down_x[X])
        Yn = Y + 1 - (u < stay_y[Y]) - (u < down_y[Y])
        z_f |= eq_b & (Xn != Yn)
        zt_f |= le_b & (Xn > Yn)
        zh_f |= ge_b & (Xn < Yn)
        X, Y = Xn, Yn
        met |= X == Y
        hit_x |= X == 0
        hit_y |= Y == 0
        if k + 1 in wanted:
            snapshot(k + 1)
    return out


def _quantile_double(dist: ExactDist, u: float) -> int:
    """Float-threshold inverse CDF, matching the vectorized searchsorted path."""
    for x, c in zip(dist.support, dist.cumulative()):
        if u < float(c):
            return x
    return dist.support[-1]


def _run_scalar(cfg: RunConfig) -> tuple[dict[int, dict[str, int]], list[CouplingTrace]]:
    """Reference engine: per-replica scalar loop, exact or double thresholds."""
    k_x, k_y, law_x, law_y = selector_kernels(cfg.N, cfg.selector)
    exact = cfg.precision == "exact"
    thr_x = birth_death_thresholds(k_x)
    thr_y = birth_death_thresholds(k_y)
    if not exact:
        thr_x = tuple([float(v) for v in arr] for arr in thr_x)
        thr_y = tuple([float(v) for v in arr] for arr in thr_y)

    counts: dict[int, dict[str, int]] = {
        n: {s: 0 for s in STAT_NAMES} for n in cfg.checkpoints
    }
    traces: list[CouplingTrace] = []

    def invert(dist: ExactDist, u) -> int:
        return dist.quantile(u) if exact else _quantile_double(dist, u)

    for r in range(cfg.replicas):
        stream = Stream(cfg.seed, r)
        draw = stream.uniform_fraction if exact else stream.uniform
        u0 = draw()
        x = invert(law_x, u0)
        if cfg.start_mode == "shared":
            y = invert(law_y, u0)
        elif cfg.start_mode == "independent":
            y = invert(law_y, draw())
        else:
            y = x

        met = x == y
        hit_x = x == 0
        hit_y = y == 0
        tau = 0 if met else None
        tau0_x = 0 if hit_x else None
        tau0_y = 0 if hit_y else None
        z_steps: list[int] = []
        zt_steps: list[int] = []
        zh_steps: list[int] = []
        steps: list[tuple[int, int, float]] = []

        def record(n: int) -> None:
            row = counts[n]
            row["neq"] += x != y
            row["tau_gt"] += not met
            row["z_pos"] += bool(z_steps)
            row["ztilde_pos"] += bool(zt_steps)
            row["zhat_pos"] += bool(zh_steps)
            row["tau0x_gt"] += not hit_x
            row["tau0y_gt"] += not hit_y

        if 0 in counts:
            record(0)
        for k in range(cfg.horizon):
            u = draw()
            if cfg.emit_traces:
                steps.append((x, y, float(u)))
            xb, yb = x, y
            x = _move(x, u, thr_x[0][k_x.index(x)], thr_x[1][k_x.index(x)])
            y = _move(y, u, thr_y[0][k_y.index(y)], thr_y[1][k_y.index(y)])
            if xb == yb and x != y:
                z_steps.append(k)
            if xb <= yb and x > y:
                zt_steps.append(k)
            if xb >= yb and x < y:
                zh_steps.append(k)
            if cfg.emit_traces:
                # order preservation holds except exactly at counter increments
                if xb <= yb and x > y:
                    assert zt_steps and zt_steps[-1] == k
                if xb >= yb and x < y:
                    assert zh_steps and zh_steps[-1] == k
            if x == y and not met:
                met = True
                tau = k + 1
            if x == 0 and not hit_x:
                hit_x = True
                tau0_x = k + 1
            if y == 0 and not hit_y:
                hit_y = True
                tau0_y = k + 1
            if k + 1 in counts:
                record(k + 1)

        if cfg.emit_traces:
            traces.append(
                CouplingTrace(
                    steps=tuple(steps),
                    final=(x, y),
                    tau=tau,
                    tau0_x=tau0_x,
                    tau0_y=tau0_y,
                    z_incr=tuple(z_steps),
                    ztilde_incr=tuple(zt_steps),
                    zhat_incr=tuple(zh_steps),
                )
            )
    return counts, traces


def run_coupling(cfg: RunConfig, jobs: int = 1, block_size: int = 1 << 14) -> CouplingStats:
    """Simulate all replicas and aggregate the event counts.

    Replica r always consumes stream (seed, r), so the aggregate counts are
    identical for any jobs/block split; blocks are reduced in replica order
    and all counts are exact integers.
    """
    if cfg.precision == "exact" or cfg.emit_traces:
        counts, traces = _run_scalar(cfg)
    else:
        counts = {n: {s: 0 for s in STAT_NAMES} for n in cfg.checkpoints}
        blocks = [
            (first, min(block_size, cfg.replicas - first))
            for first in range(0, cfg.replicas, block_size)
        ]

        def merge(block_counts: dict[int, dict[str, int]]) -> None:
            for n, row in block_counts.items():
                for s, v in row.items():
                    counts[n][s] += v

        if jobs > 1 and len(blocks) > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=jobs) as pool:
                for result in pool.map(
                    lambda fc: _run_block_double(cfg, fc[0], fc[1]), blocks
                ):
                    merge(result)
        else:
            for first, cnt in blocks:
                merge(_run_block_double(cfg, first, cnt))
        traces = []

    by_time = {
        n: Aggregates(n=n, replicas=cfg.replicas, counts=row)
        for n, row in counts.items()
    }
    return CouplingStats(config=cfg, by_time=by_time, traces=tuple(traces))


# ---------------------------------------------------------------------------
# certificates and the assembled bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MonotonicityReport:
    """K(x, [x-1, x]) >= K(x+1, x) margins of a birth-and-death kernel."""

    kernel_label: str
    ok: bool
    margins: tuple[tuple[int, Fraction], ...]


def monotonicity_certificate(kernel: StochasticKernel) -> MonotonicityReport:
    down, stay = birth_death_thresholds(kernel)
    states = kernel.states
    margins = []
    ok = True
    for i in range(len(states) - 1):
        margin = stay[i] - down[i + 1]
        ok = ok and margin >= 0
        margins.append((states[i], margin))
    return MonotonicityReport(kernel_label=kernel.label, ok=ok, margins=tuple(margins))


@dataclass(frozen=True)
class DriftCertificate:
    """Numerically certified per-step contraction of exp(theta y / N).

    F(y) = E[exp(theta (Y' - y)/N) | Y = y]
         = 1 + (e^{-theta/N} - 1) K(y, y-1) + (e^{theta/N} - 1) K(y, y+1)

    c_est = N^3 (1 - max_{y in [1, N-4]} F(y)); positivity certifies the
    hitting-time tail P[tau_0 > n] <= e^{1 - c_est n / N^3} for any initial
    law (theta <= 1 keeps the constant e valid).
    """

    N: int
    kernel_label: str
    theta: float
    c_est: float
    table: tuple[tuple[int, float], ...]
    max_at_endpoints: bool
    vertex: float

    def tail_bound(self, n: int) -> float:
        return math.exp(min(1.0 - self.c_est * n / self.N ** 3, 700.0))


def _drift_for(kernel: StochasticKernel, N: int, theta: Fraction, digits: int) -> DriftCertificate:
    down, stay = birth_death_thresholds(kernel)
    states = kernel.states
    with mpmath.workdps(digits):
        em = mpmath.e ** (-mpmath.mpf(theta.numerator) / (theta.denominator * N)) - 1
        ep = mpmath.e ** (mpmath.mpf(theta.numerator) / (theta.denominator * N)) - 1
        table = []
        for i, y in enumerate(states):
            if y == 0:
                continue
            d = down[i]
            up = Fraction(1) - stay[i]
            f = 1 + em * mpmath.mpf(d.numerator) / d.denominator + ep * mpmath.mpf(
                up.numerator
            ) / up.denominator
            table.append((y, f))
        worst = max(v for _, v in table)
        c_est = N ** 3 * (1 - worst)
        endpoint = max(table[0][1], table[-1][1])
        # vertex of the quadratic continuation, via finite differences in mpf
        if len(table) >= 3:
            f1, f2, f3 = (v for _, v in table[:3])
            second = f3 - 2 * f2 + f1
            first = f2 - f1
            vertex = (
                float(table[0][0] + mpmath.mpf(1) / 2 - first / second)
                if second != 0
                else float("nan")
            )
        else:
            vertex = float("nan")
    return DriftCertificate(
        N=N,
        kernel_label=kernel.label,
        theta=float(theta),
        c_est=float(c_est),
        table=tuple((y, float(v)) for y, v in table),
        max_at_endpoints=worst == endpoint,
        vertex=vertex,
    )


def drift_certificate(
    N: int, which: str = "R", theta: Fraction | None = None, digits: int = 40
) -> DriftCertificate:
    """Drift certificate for R (theta = 1, the classical exp(y/N) function)
    or R_tilde.

    The exp(y/N) test function does not contract for R_tilde (its up/down
    gap of one half is beaten by the second-order terms near y = 1), so for
    R_tilde the rate theta is auto-selected from a small grid; any theta in
    (0, 1/2) restores a positive margin.
    """
    if N < 5:
        raise ValueError("N must be >= 5")
    p_check, r, r_tilde = build_restricted(N)
    kernel = {"R": r, "R_tilde": r_tilde}.get(which)
    if kernel is None:
        raise ValueError("which must be 'R' or 'R_tilde'")
    if theta is not None:
        return _drift_for(kernel, N, Fraction(theta), digits)
    if which == "R":
        return _drift_for(kernel, N, Fraction(1), digits)
    candidates = [
        _drift_for(kernel, N, t, digits)
        for t in (Fraction(1), Fraction(1, 2), Fraction(1, 4), Fraction(1, 8))
    ]
    return max(candidates, key=lambda cert: cert.c_est)


@dataclass(frozen=True)
class TVBoundReport:
    """The section-5 bound, assembled analytically and from simulation."""

    N: int
    n: int
    c_hat: float
    analytic_bound: float
    empirical_bound: float | None
    terms: Mapping[str, float]


def assemble_tv_bound(
    N: int, n: int, estimates: Aggregates | None = None, digits: int = 40
) -> TVBoundReport:
    """5 * 2^N n / N! + 2 e^{1 - c_hat n / N^3} with c_hat the smaller of the
    R and R_tilde drift rates, plus the same bound rebuilt from empirical
    terms (Z, Z-tilde, Z-hat and both hitting tails) when provided."""
    cert_r = drift_certificate(N, "R", digits=digits)
    cert_rt = drift_certificate(N, "R_tilde", digits=digits)
    c_hat = min(cert_r.c_est, cert_rt.c_est)
    linear = float(Fraction(5 * 2 ** N * n, math.factorial(N)))
    exp_term = 2 * math.exp(min(1.0 - c_hat * n / N ** 3, 700.0))
    analytic = linear + exp_term
    empirical = None
    terms = {
        "linear": linear,
        "exponential": exp_term,
        "c_R": cert_r.c_est,
        "c_R_tilde": cert_rt.c_est,
    }
    if estimates is not None:
        empirical = sum(
            estimates.estimate(s)
            for s in ("z_pos", "ztilde_pos", "zhat_pos", "tau0x_gt", "tau0y_gt")
        )
        terms.update(
            {f"empirical_{s}": estimates.estimate(s) for s in STAT_NAMES}
        )
    return TVBoundReport(
        N=N,
        n=n,
        c_hat=c_hat,
        analytic_bound=analytic,
        empirical_bound=empirical,
        terms=terms,
    )


def exact_tv_pi_check_zeta(N: int) -> Fraction:
    """Half-convention distance between pi_check and zeta (both exact)."""
    result = tv_distance(pi_conditioned(N), zeta_law(N), "half")
    assert isinstance(result, Fraction)
    return result


def suggested_horizon(N: int, exponent: int = 4, digits: int = 40) -> int:
    """ceil(N^exponent ln N / c_hat): the horizon at which the exponential
    term of the assembled bound drops to about e^{1 - N ln N}.

    The drift rate c_hat/N^3 per step forces exponent 4 for that target;
    exponent 1 is the other reading found in the source material and is
    exposed so both assembled bounds can be reported side by side.
    """
    cert_r = drift_certificate(N, "R", digits=digits)
    cert_rt = drift_certificate(N, "R_tilde", digits=digits)
    c_hat = min(cert_r.c_est, cert_rt.c_est)
    if c_hat <= 0:
        raise ValueError(f"no positive drift certificate at N={N}")
    return math.ceil(N ** exponent * math.log(N) / c_hat)
