"""Random-coding error bound and codeword lengths for joint ML decoding.

All quantities live on the log scale: an alphabet enters only through
``ln M_j``, so alphabets are never materialised and ``ln M`` may be huge.
A schedule ``s`` gives transmitter ``j`` the product alphabet of ``s_j``
copies of its own alphabet, i.e. ``s_j * ln M_j`` nats.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

from .errors import CapExceeded, DomainError, UnreachableReliability

LENGTH_CAP = 10**8
RHO_GRID = (0.001, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


@dataclass(frozen=True)
class CodingConfig:
    """Channel and code parameters for ``J`` transmitters.

    ``M`` holds the alphabet sizes. Pass ``log_M`` instead (or as well) to
    work with alphabets too large to write down; when both are given
    ``log_M`` wins.
    """

    M: Optional[tuple] = None
    P: tuple = ()
    sigma2: float = 1.0
    rho: float = 1.0
    pe: float = 0.01
    log_M: Optional[tuple] = field(default=None)

    def __post_init__(self):
        P = tuple(float(p) for p in self.P)
        object.__setattr__(self, "P", P)
        if self.log_M is None:
            if self.M is None:
                raise DomainError("either M or log_M is required")
            M = tuple(int(m) for m in self.M)
            if any(m < 2 for m in M):
                raise DomainError(f"alphabet sizes must be >= 2, got {M}")
            object.__setattr__(self, "M", M)
            object.__setattr__(self, "log_M", tuple(math.log(m) for m in M))
        else:
            log_M = tuple(float(v) for v in self.log_M)
            if any(v < math.log(2) - 1e-12 for v in log_M):
                raise DomainError("log alphabet sizes must be >= ln 2")
            object.__setattr__(self, "log_M", log_M)
        if len(self.log_M) != len(P) or not P:
            raise DomainError("M and P must be non-empty and of equal length")
        if any(p <= 0 for p in P):
            raise DomainError(f"powers must be positive, got {P}")
        if not self.sigma2 > 0:
            raise DomainError("sigma2 must be positive")
        if not 0.0 <= self.rho <= 1.0:
            raise DomainError("rho must lie in [0, 1]")
        if not 0.0 < self.pe < 1.0:
            raise DomainError("pe must lie in (0, 1)")

    @property
    def J(self) -> int:
        return len(self.P)

    def with_rho(self, rho: float) -> "CodingConfig":
        return CodingConfig(M=self.M, P=self.P, sigma2=self.sigma2, rho=rho,
                            pe=self.pe, log_M=self.log_M)


def active(s: Sequence[int]) -> tuple:
    """Indices of the transmitters scheduled by ``s``."""
    return tuple(j for j, sj in enumerate(s) if sj > 0)


def subsets(indices: Sequence[int]) -> Iterator[tuple]:
    """All non-empty subsets of ``indices``, smallest first."""
    for size in range(1, len(indices) + 1):
        yield from itertools.combinations(indices, size)


def _check_schedule(s, J):
    s = tuple(int(v) for v in s)
    if len(s) != J:
        raise DomainError(f"schedule {s} has length {len(s)}, expected {J}")
    if any(v < 0 for v in s):
        raise DomainError(f"schedule entries must be non-negative: {s}")
    if not any(s):
        raise DomainError("the all-zero schedule has no codeword")
    return s


def error_exponent(config: CodingConfig, S: Sequence[int]) -> float:
    """Gaussian-input exponent ``rho * ln(1 + sum_S P / ((1 + rho) sigma2))``."""
    S = tuple(S)
    if not S:
        raise DomainError("exponent needs a non-empty transmitter subset")
    if any(j < 0 or j >= config.J for j in S):
        raise DomainError(f"subset {S} not within 0..{config.J - 1}")
    power = sum(config.P[j] for j in S)
    return config.rho * math.log1p(power / ((1.0 + config.rho) * config.sigma2))


def _terms(config, s):
    """(log numerator, exponent) per non-empty subset of active(s)."""
    out = []
    for S in subsets(active(s)):
        num = config.rho * sum(s[j] * config.log_M[j] for j in S)
        out.append((num, error_exponent(config, S)))
    return out


def log_chi(config: CodingConfig, s: Sequence[int], N: int) -> float:
    s = _check_schedule(s, config.J)
    exps = [a - N * e for a, e in _terms(config, s)]
    top = max(exps)
    return top + math.log(sum(math.exp(x - top) for x in exps))


def chi(config: CodingConfig, s: Sequence[int], N: int) -> float:
    """Random-coding bound on the joint decoding error after ``N`` channel uses."""
    if N < 0:
        raise DomainError("N must be non-negative")
    s = _check_schedule(s, config.J)
    return sum(math.exp(a - N * e) for a, e in _terms(config, s))


def codeword_length(config: CodingConfig, s: Sequence[int], cap: int = LENGTH_CAP) -> int:
    """Smallest ``N >= 1`` with ``chi(config, s, N) <= pe``.

    Uses doubling then bisection on the log-domain bound, which is strictly
    decreasing in ``N`` once every exponent is positive.
    """
    s = _check_schedule(s, config.J)
    terms = _terms(config, s)
    if any(e <= 0.0 for _, e in terms):
        raise UnreachableReliability(chi(config, s, 0), config.pe)
    target = math.log(config.pe)

    def ok(n):
        exps = [a - n * e for a, e in terms]
        top = max(exps)
        return top + math.log(sum(math.exp(x - top) for x in exps)) <= target

    if ok(1):
        return 1
    lo, hi = 1, 2
    while not ok(hi):
        if hi >= cap:
            raise CapExceeded(cap)
        lo, hi = hi, min(2 * hi, cap)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def ceil_to_multiple(x: float, q: float) -> float:
    """``min(n >= 1 : x <= n q) * q``."""
    if not q > 0:
        raise DomainError("rounding quantum must be positive")
    n = max(1, math.ceil(x / q))
    while x > n * q:
        n += 1
    while n > 1 and x <= (n - 1) * q:
        n -= 1
    return n * q


def _units(x, q):
    return max(1, round(ceil_to_multiple(x, q) / q))


def length_bounds(config: CodingConfig, s: Sequence[int]) -> tuple:
    """Closed-form (lower, upper) bracket around ``codeword_length``.

    ``k`` in the upper bound's ``pe / 2**(k-1)`` is the number of summed
    error terms, one per non-empty subset of the scheduled transmitters.
    """
    s = _check_schedule(s, config.J)
    terms = _terms(config, s)
    if any(e <= 0.0 for _, e in terms):
        raise UnreachableReliability(chi(config, s, 0), config.pe)
    k = len(terms)
    base = -math.log(config.pe)
    slack = (k - 1) * math.log(2.0)
    lower = max(_units(base + a, e) for a, e in terms)
    upper = max(_units(base + slack + a, e) for a, e in terms)
    return lower, upper


def asymptotic_rate(P: Sequence[float], sigma2: float, s: Sequence[int],
                    rho: Optional[float] = None) -> tuple:
    """Per-class limit of ``s_j ln M / N(s)`` as the alphabet grows.

    With ``rho`` given the limit is taken at that fixed ``rho``; with
    ``rho=None`` the further ``rho -> 0`` limit is returned (nat rates of
    the asymptotic box corner).
    """
    s = tuple(int(v) for v in s)
    if len(s) != len(P):
        raise DomainError("schedule and powers differ in length")
    if any(v < 0 for v in s) or not any(s):
        raise DomainError("asymptotic rate needs a non-empty schedule")
    if rho is not None and not 0.0 < rho <= 1.0:
        raise DomainError("fixed-rho mode needs 0 < rho <= 1")
    best = math.inf
    for S in subsets(active(s)):
        snr = sum(P[j] for j in S) / sigma2
        if rho is None:
            per_nat = math.log1p(snr)
        else:
            per_nat = math.log1p(snr / (1.0 + rho))
        best = min(best, per_nat / sum(s[j] for j in S))
    return tuple(sj * best for sj in s)


def best_rho(config: CodingConfig, s: Sequence[int], grid: Sequence[float] = RHO_GRID) -> tuple:
    """Scan ``grid`` for the rho giving the shortest codeword: ``(rho, N)``."""
    found = None
    for rho in grid:
        try:
            n = codeword_length(config.with_rho(rho), s)
        except (UnreachableReliability, CapExceeded):
            continue
        if found is None or n < found[1]:
            found = (rho, n)
    if found is None:
        raise CapExceeded(LENGTH_CAP)
    return found
