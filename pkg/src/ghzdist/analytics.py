"""Closed-form rate and fidelity expressions for factory-node GHZ distribution.

Everything here is a pure function of the parameters: exact, leading-order and
bounded expressions for the distribution rate, the per-qubit noise
combinatorics of the delivered state, expected order statistics of geometric
waiting times, and the memory-decoherence kernel G.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .params import SimParams

SUBSET_SUM_MAX_QUBITS = 24  # 2^N subset enumeration feasibility cap


def _one_minus_q_pow(q: float, k: int) -> float:
    """(1 - q)^k without underflow surprises for small q and large k."""
    if k == 0:
        return 1.0
    if q == 1.0:
        return 0.0
    return math.exp(k * math.log1p(-q))


def harmonic(n: int) -> float:
    """n-th harmonic number, exact partial sum."""
    if n < 1:
        raise ValueError(f"harmonic number needs n >= 1, got {n}")
    return math.fsum(1.0 / i for i in range(1, n + 1))


def expected_n_all_exact(n: int, q: float) -> float:
    """Expected maximum of n iid geometric(q) variables.

    Alternating binomial sum: sum_j (-1)^(j+1) C(n, j) / (1 - (1-q)^j).
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must be in (0, 1], got {q}")
    return math.fsum(
        (-1.0) ** (j + 1) * math.comb(n, j) / (1.0 - _one_minus_q_pow(q, j))
        for j in range(1, n + 1)
    )


def expected_n_all_upper_bound(n: int, q: float) -> float:
    """Upper bound 1 + H_n / (-log(1 - q)); equals 1 in the q -> 1 limit."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must be in (0, 1], got {q}")
    if q == 1.0:
        return 1.0
    return 1.0 + harmonic(n) / (-math.log1p(-q))


def rate_exact(n: int, q_link: float, q_bsm: float, dt: float = 1.0) -> float:
    """GHZ distribution rate q_bsm^n / (<n_all> dt) with the exact <n_all>."""
    return q_bsm**n / (expected_n_all_exact(n, q_link) * dt)


def rate_leading(n: int, q_link: float, q_bsm: float, dt: float = 1.0) -> float:
    """Leading order in q_link: q_bsm^n q_link / (H_n dt)."""
    return q_bsm**n * q_link / (harmonic(n) * dt)


def _t_masses(n: int, q: float, i_max: int) -> list[float]:
    """Total masses T_(i/n) of the exactly-i-after-last-success distributions.

    T_0 = 1 and
    T_i = sum_l C(n-i+l, l) q^l (1-q)^(n-i) / (1 - (1-q)^(n-i+l)) T_(i-l).
    """
    t = [1.0]
    for i in range(1, i_max + 1):
        acc = 0.0
        for l in range(1, i + 1):
            num = (
                math.comb(n - i + l, l)
                * q**l
                * _one_minus_q_pow(q, n - i)
            )
            den = 1.0 - _one_minus_q_pow(q, n - i + l)
            acc += num / den * t[i - l]
        t.append(acc)
    return t


def expected_order_stat(i: int, n: int, q: float, mode: str = "exact") -> float:
    """Expected round of the i-th success among n parallel geometric(q) links.

    exact        closed form via the T-mass recursion
    leading      (1/q) sum_{k=n+1-i}^{n} 1/k, leading order in q
    upper_bound  sum_{k=n+1-i}^{n} 1 / (1 - (1-q)^k)
    """
    if not 1 <= i <= n:
        raise ValueError(f"order index {i} outside 1..{n}")
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must be in (0, 1], got {q}")
    if mode == "leading":
        return math.fsum(1.0 / k for k in range(n + 1 - i, n + 1)) / q
    if mode == "upper_bound":
        return math.fsum(
            1.0 / (1.0 - _one_minus_q_pow(q, k)) for k in range(n + 1 - i, n + 1)
        )
    if mode != "exact":
        raise ValueError(f"unknown mode {mode!r}")
    t = _t_masses(n, q, i - 1)
    total = 1.0 / (1.0 - _one_minus_q_pow(q, n))
    for k in range(1, i):
        total += t[k] / (1.0 - _one_minus_q_pow(q, n - k))
    return total


@dataclass(frozen=True)
class GSpec:
    """Tracked subset for the decoherence expectation G.

    positions are the ordered ranks c_1 < ... < c_M (in order of Bell-state
    arrival) of the tracked qubits among all n_total; rates[i] is the
    per-round loss probability of tracked qubit i (1 - p_mem^2 in the
    symmetric network).
    """

    n_total: int
    positions: tuple[int, ...]
    rates: tuple[float, ...]

    def __post_init__(self):
        if self.n_total < 1:
            raise ValueError(f"n_total must be >= 1, got {self.n_total}")
        if len(self.positions) != len(self.rates):
            raise ValueError("positions and rates must have equal length")
        if len(self.positions) > self.n_total:
            raise ValueError("cannot track more positions than n_total")
        for a, b in zip(self.positions, self.positions[1:]):
            if a >= b:
                raise ValueError(f"positions must be strictly increasing: {self.positions}")
        if self.positions and not (
            1 <= self.positions[0] and self.positions[-1] <= self.n_total
        ):
            raise ValueError(f"positions must lie in 1..{self.n_total}")
        for r in self.rates:
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"rates must lie in [0, 1], got {r}")


def g_value(spec: GSpec, q_link: float, mode: str = "leading") -> float:
    """E[prod_i (1 - r_i)^(rounds qubit i waits until the last arrival)].

    leading      prod_k (N+1-k) q / (sum_{c_i<k} r_i + (N+1-k) q),
                 leading order in q_link and the rates
    lower_bound  strict lower bound keeping the no-simultaneous-success terms
                 exact:
                 prod_k (N+1-k) q (1-q)^(N-k) R_k / (1 - (1-q)^(N+1-k) R_k)
                 with R_k = prod_{c_i<k} (1 - r_i)
    """
    if not 0.0 < q_link <= 1.0:
        raise ValueError(f"q_link must be in (0, 1], got {q_link}")
    n = spec.n_total
    if mode == "leading":
        out = 1.0
        rate_sum = 0.0
        idx = 0
        for k in range(1, n + 1):
            while idx < len(spec.positions) and spec.positions[idx] < k:
                rate_sum += spec.rates[idx]
                idx += 1
            boost = (n + 1 - k) * q_link
            out *= boost / (rate_sum + boost)
        return out
    if mode == "lower_bound":
        out = 1.0
        survive = 1.0
        idx = 0
        for k in range(1, n + 1):
            while idx < len(spec.positions) and spec.positions[idx] < k:
                survive *= 1.0 - spec.rates[idx]
                idx += 1
            boost = (n + 1 - k) * q_link
            num = boost * _one_minus_q_pow(q_link, n - k) * survive
            den = 1.0 - _one_minus_q_pow(q_link, n + 1 - k) * survive
            out *= num / den
        return out
    raise ValueError(f"unknown mode {mode!r}")


def fidelity_coefficient(u_size: int, n: int, p_link: float, p_bsm: float) -> float:
    """Subset-size coefficient A_|U| of the rearranged fidelity sum.

    (p_link p_bsm^2)^|U| (2^-n + delta_{|U|,n}/2) for even |U|, and
    (p_link p_bsm^2)^|U| delta_{|U|,n}/2 for odd |U|.
    """
    if not 0 <= u_size <= n:
        raise ValueError(f"subset size {u_size} outside 0..{n}")
    base = (p_link * p_bsm**2) ** u_size
    if u_size % 2 == 0:
        return base * (2.0**-n + (0.5 if u_size == n else 0.0))
    return 0.5 * base if u_size == n else 0.0


def f_rand(p_ghz: float, p: Sequence[float]) -> float:
    """GHZ fidelity of a p_ghz-depolarized GHZ state after per-qubit
    depolarizing channels p_i.

    The subset sum with weights 2^(delta_{|U|,0} + delta_{|U|,N} - 1)
    collapses to the product form
    (1-p_ghz)/2^N + p_ghz [prod p_i + prod (1-p_i)/2 + prod (1+p_i)/2] / 2.
    """
    n = len(p)
    if n < 2:
        raise ValueError("f_rand needs at least 2 qubits")
    arr = np.asarray(p, dtype=float)
    core = 0.5 * (
        float(np.prod(arr))
        + float(np.prod((1.0 - arr) / 2.0))
        + float(np.prod((1.0 + arr) / 2.0))
    )
    return (1.0 - p_ghz) / 2.0**n + p_ghz * core


def ghz_overlap_subset_sum(p: Sequence[float]) -> float:
    """Explicit 2^N-term subset sum behind f_rand (p_ghz stripped).

    Kept as the slow reference route; f_rand evaluates the same polynomial in
    product form.
    """
    n = len(p)
    if n > SUBSET_SUM_MAX_QUBITS:
        raise ValueError(f"subset sum infeasible beyond {SUBSET_SUM_MAX_QUBITS} qubits")
    total = 0.0
    for mask in range(2**n):
        size = mask.bit_count()
        weight = 2.0 ** ((size == 0) + (size == n) - 1)
        term = weight
        for i in range(n):
            term *= (1.0 - p[i]) / 2.0 if (mask >> i) & 1 else p[i]
        total += term
    return total


def subset_coefficient_b(u_size: int, n: int) -> float:
    """Coefficient B_|U| collecting the subset sum by monomials prod p_i."""
    if u_size % 2 == 0:
        return 2.0**-n + (0.5 if u_size == n else 0.0)
    return 0.5 if u_size == n else 0.0


def coefficient_identity_check(
    n: int,
    samples: int = 100,
    seed: int = 0,
    perturbation: float = 0.0,
) -> float:
    """Max |subset-sum form - B-coefficient form| over random p vectors.

    ``perturbation`` skews B_0 and exists as a negative control for the
    verification runner.
    """
    if n > 8:
        raise ValueError("identity check capped at n = 8")
    rng = np.random.default_rng(seed)
    vectors = [np.zeros(n), np.ones(n)]
    vectors += [rng.random(n) for _ in range(samples)]
    worst = 0.0
    for p in vectors:
        lhs = ghz_overlap_subset_sum(p)
        rhs = perturbation
        for mask in range(2**n):
            size = mask.bit_count()
            term = subset_coefficient_b(size, n)
            for i in range(n):
                if (mask >> i) & 1:
                    term *= p[i]
            rhs += term
        worst = max(worst, abs(lhs - rhs))
    return worst


@dataclass(frozen=True)
class FidelityBreakdown:
    """Closed-form fidelity and its per-subset contributions.

    value = (1 - p_ghz)/2^N + p_ghz * sum(contributions.values()); keys are
    the tracked position tuples.
    """

    value: float
    contributions: dict[tuple[int, ...], float]
    mode: str


def fidelity_closed_form(params: SimParams, mode: str = "leading") -> FidelityBreakdown:
    """Expected GHZ fidelity of the factory protocol.

    Sums A_|U| g_value(U) over all subsets U of arrival ranks, with every
    tracked rate equal to 1 - p_mem^2.  ``mode`` selects the leading-order or
    lower-bound evaluation of the decoherence kernel.
    """
    n = params.n_end_nodes
    if n > SUBSET_SUM_MAX_QUBITS:
        raise ValueError(f"subset sum infeasible beyond {SUBSET_SUM_MAX_QUBITS} qubits")
    rate = 1.0 - params.p_mem**2
    contributions: dict[tuple[int, ...], float] = {}
    total = 0.0
    for mask in range(2**n):
        size = mask.bit_count()
        coeff = fidelity_coefficient(size, n, params.p_link, params.p_bsm)
        if coeff == 0.0:
            continue
        positions = tuple(i + 1 for i in range(n) if (mask >> i) & 1)
        spec = GSpec(n, positions, (rate,) * size)
        contrib = coeff * g_value(spec, params.q_link, mode)
        contributions[positions] = contrib
        total += contrib
    value = (1.0 - params.p_ghz) / 2.0**n + params.p_ghz * total
    return FidelityBreakdown(value, contributions, mode)
