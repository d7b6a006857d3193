"""Schedule catalogs, service-rate geometry and region membership.

Message-rate vectors (messages/slot) live in the stability-region world:
the outer bound is the down-closure of the convex hull of the per-schedule
service vectors ``v_j(s) = s_j / N(s)``. Nat-rate vectors (nats/slot) live
in the Gaussian capacity-region world. ``RateVector`` carries the tag so
the two are not mixed by accident.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from . import coding
from .coding import CodingConfig, active, subsets
from .errors import (CatalogTooLarge, DomainError, KBudgetExceeded, MacStabError,
                     OutsideRegion, UnservedQueue)

TOL = 1e-9
CATALOG_LIMIT = 10**5

MSG = "msg/slot"
NAT = "nat/slot"


class Verdict(str, enum.Enum):
    INSIDE = "inside-interior"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"

    @classmethod
    def from_margin(cls, margin, tol=TOL):
        if margin > tol:
            return cls.INSIDE
        if margin < -tol:
            return cls.OUTSIDE
        return cls.BOUNDARY


@dataclass(frozen=True)
class RateVector:
    values: tuple
    unit: str = MSG

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.unit not in (MSG, NAT):
            raise DomainError(f"unknown rate unit {self.unit!r}")
        if any(v < 0 or math.isnan(v) for v in self.values):
            raise DomainError(f"rates must be non-negative: {self.values}")

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, j):
        return self.values[j]


def _rates(beta, unit):
    if isinstance(beta, RateVector):
        if beta.unit != unit:
            raise DomainError(f"expected a {unit} rate vector, got {beta.unit}")
        return beta.values
    return RateVector(tuple(beta), unit).values


@dataclass
class ScheduleCatalog:
    """Every schedule with at most ``K`` messages, the idle schedule first."""

    J: int
    K: int
    config: CodingConfig
    schedules: list
    lengths: dict
    rates: dict

    @property
    def idle(self) -> tuple:
        return (0,) * self.J

    @property
    def serving(self) -> list:
        return [s for s in self.schedules if any(s)]

    def __len__(self):
        return len(self.schedules)

    def __contains__(self, s):
        return tuple(s) in self.lengths or tuple(s) == self.idle


def _compositions(J, total):
    if J == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(J - 1, total - first):
            yield (first,) + rest


def enumerate_schedules(J: int, K: int, config: CodingConfig,
                        limit: int = CATALOG_LIMIT) -> ScheduleCatalog:
    if J < 1 or K < 1:
        raise DomainError("need J >= 1 and K >= 1")
    if config.J != J:
        raise DomainError(f"config describes {config.J} transmitters, not {J}")
    size = math.comb(J + K, J)
    if size > limit:
        raise CatalogTooLarge(size, limit)
    schedules = [s for total in range(K + 1) for s in _compositions(J, total)]
    lengths, rates = {}, {}
    for s in schedules[1:]:
        n = coding.codeword_length(config, s)
        lengths[s] = n
        rates[s] = tuple(sj / n for sj in s)
    return ScheduleCatalog(J, K, config, schedules, lengths, rates)


@dataclass
class PolicySpec:
    """State-independent policy: schedule probabilities and class splits.

    ``p`` only lists non-empty schedules; the missing mass is the idle
    probability. ``mu[j]`` maps each schedule serving queue ``j`` to the
    probability that an arrival at ``j`` joins class ``(j, s)``.
    """

    p: dict
    mu: dict = field(default_factory=dict)

    @property
    def idle(self) -> float:
        return max(0.0, 1.0 - sum(self.p.values()))


def split_distribution(p: Mapping, catalog: ScheduleCatalog,
                       demand: Optional[Sequence[float]] = None) -> PolicySpec:
    """Attach the splitting probabilities ``mu_js ~ p(s) s_j / N(s)``.

    A queue no schedule serves raises ``UnservedQueue`` unless ``demand``
    says that queue receives no traffic.
    """
    probs = {}
    for s, w in p.items():
        s = tuple(s)
        if not any(s):
            continue
        if s not in catalog.lengths:
            raise DomainError(f"schedule {s} is not in the catalog")
        if w < 0:
            raise DomainError(f"negative probability for {s}")
        probs[s] = float(w)
    if sum(probs.values()) > 1.0 + 1e-12:
        raise DomainError("schedule probabilities sum above one")
    mu = {}
    for j in range(catalog.J):
        weights = {s: w * s[j] / catalog.lengths[s]
                   for s, w in probs.items() if s[j] > 0 and w > 0}
        total = sum(weights.values())
        if total <= 0:
            if demand is None or demand[j] > 0:
                raise UnservedQueue(j)
            mu[j] = {}
            continue
        mu[j] = {s: w / total for s, w in weights.items()}
    return PolicySpec(probs, mu)


def psi(policy, catalog: ScheduleCatalog) -> RateVector:
    """Per-queue service rate ``sum_s p(s) s_j / N(s)`` in messages/slot."""
    p = policy.p if isinstance(policy, PolicySpec) else policy
    out = [0.0] * catalog.J
    for s, w in p.items():
        s = tuple(s)
        if not any(s):
            continue
        n = catalog.lengths[s]
        for j in active(s):
            out[j] += w * s[j] / n
    return RateVector(tuple(out), MSG)


@dataclass
class Membership:
    verdict: Verdict
    margin: float
    certificate: dict


def _solve_margin(beta, catalog):
    """max t s.t. sum_s pi(s) v(s) >= beta + t, pi on the simplex."""
    scheds = catalog.schedules
    n = len(scheds)
    V = np.zeros((catalog.J, n))
    for i, s in enumerate(scheds[1:], start=1):
        V[:, i] = catalog.rates[s]
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-V, np.ones((catalog.J, 1))])
    b_ub = -np.asarray(beta, dtype=float)
    A_eq = np.zeros((1, n + 1))
    A_eq[0, :n] = 1.0
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * n + [(None, None)], method="highs")
    if res.status != 0:
        raise MacStabError(f"LP solver failed: {res.message}")
    pi = np.clip(res.x[:n], 0.0, None)
    pi /= pi.sum()
    return float(res.x[-1]), {s: float(w) for s, w in zip(scheds, pi)}


def outer_bound_membership(beta, catalog: ScheduleCatalog, tol: float = TOL) -> Membership:
    """Classify a message-rate vector against the outer bound.

    The margin is the LP optimum ``t``; the certificate is the optimal
    schedule measure (idle schedule included).
    """
    beta = _rates(beta, MSG)
    if len(beta) != catalog.J:
        raise DomainError("rate vector and catalog differ in dimension")
    margin, pi = _solve_margin(beta, catalog)
    return Membership(Verdict.from_margin(margin, tol), margin, pi)


def synthesize_policy(EA, catalog: ScheduleCatalog, tol: float = TOL) -> PolicySpec:
    """State-independent policy whose service rates strictly exceed ``EA``.

    The LP-optimal measure's idle mass is spread evenly over the serving
    schedules, which can only raise every service rate.
    """
    EA = _rates(EA, MSG)
    result = outer_bound_membership(EA, catalog, tol)
    if result.verdict is not Verdict.INSIDE:
        raise OutsideRegion(result.margin)
    serving = catalog.serving
    idle = result.certificate.get(catalog.idle, 0.0)
    bump = idle / len(serving)
    p = {s: result.certificate.get(s, 0.0) + bump for s in serving}
    p = {s: w for s, w in p.items() if w > 0}
    policy = split_distribution(p, catalog, demand=EA)
    rates = psi(policy, catalog)
    if not all(r > a for r, a in zip(rates, EA)):
        raise OutsideRegion(min(r - a for r, a in zip(rates, EA)))
    return policy


def capacity_margins(r, P: Sequence[float], sigma2: float) -> dict:
    """Slack ``ln(1 + sum_S P / sigma2) - sum_S r`` for every non-empty subset."""
    r = _rates(r, NAT)
    if len(r) != len(P):
        raise DomainError("rate vector and powers differ in dimension")
    return {S: math.log1p(sum(P[k] for k in S) / sigma2) - sum(r[k] for k in S)
            for S in subsets(range(len(P)))}


def capacity_membership(r, P: Sequence[float], sigma2: float, tol: float = TOL) -> Verdict:
    return Verdict.from_margin(min(capacity_margins(r, P, sigma2).values()), tol)


def asymptotic_box(s: Sequence[int], P: Sequence[float], sigma2: float) -> RateVector:
    """Corner of the box of nat rates schedule ``s`` sustains as M grows and rho -> 0."""
    return RateVector(coding.asymptotic_rate(P, sigma2, s), NAT)


def nat_rate_threshold(s: Sequence[int], config: CodingConfig) -> RateVector:
    """Finite-alphabet stability thresholds ``s_j ln M_j / N(s)`` in nats/slot."""
    n = coding.codeword_length(config, s)
    return RateVector(tuple(sj * lm / n for sj, lm in zip(s, config.log_M)), NAT)


def _box_margin(s, r, P, sigma2):
    corner = coding.asymptotic_rate(P, sigma2, s)
    return min(corner[j] - r[j] for j in range(len(r)) if r[j] > 0)


def schedule_for_rate(r, P: Sequence[float], sigma2: float, eps: float = 0.01,
                      k_max: int = 64) -> tuple:
    """Find an integer schedule whose asymptotic box strictly contains ``r``.

    Scans total scale ``k = 1..k_max`` and tries the integer points around
    ``k (r + eps) / sum(r + eps)`` (rounded point first, then the other
    floor/ceil corners), restricted to the queues with ``r_j > 0``.
    """
    r = _rates(r, NAT)
    if eps <= 0:
        raise DomainError("eps must be positive")
    if capacity_membership(tuple(v + eps for v in r), P, sigma2) is not Verdict.INSIDE:
        raise DomainError("r + eps is not inside the capacity region; pick a smaller eps")
    pos = [j for j, v in enumerate(r) if v > 0]
    J = len(r)
    if not pos:
        s = tuple(1 if j == 0 else 0 for j in range(J))
        return s
    total = sum(r[j] + eps for j in pos)
    weights = {j: (r[j] + eps) / total for j in pos}
    best = -math.inf
    seen = set()
    for k in range(1, k_max + 1):
        rounded = tuple(math.floor(k * weights[j] + 0.5) if j in weights else 0
                        for j in range(J))
        corners = itertools.product(*[
            (math.floor(k * weights[j]), math.ceil(k * weights[j])) if j in weights else (0,)
            for j in range(J)])
        for s in itertools.chain([rounded], corners):
            if s in seen or not any(s) or sum(s) > k_max:
                continue
            seen.add(s)
            if any(s[j] == 0 for j in pos):
                best = max(best, -max(r[j] for j in pos if s[j] == 0))
                continue
            margin = _box_margin(s, r, P, sigma2)
            if margin > 0:
                return s
            best = max(best, margin)
    raise KBudgetExceeded(k_max, best)


def _check_direction(d, J):
    d = np.asarray(d, dtype=float)
    if d.shape != (J,):
        raise DomainError(f"direction must have {J} entries")
    if np.any(d < 0) or not np.any(d > 0):
        raise DomainError("direction must be non-negative and non-zero")
    return d / np.linalg.norm(d)


def capacity_radius(direction, P: Sequence[float], sigma2: float) -> float:
    """Distance from the origin to the capacity boundary along ``direction``."""
    d = _check_direction(direction, len(P))
    return min(math.log1p(sum(P[k] for k in S) / sigma2) / d[list(S)].sum()
               for S in subsets(range(len(P))) if d[list(S)].sum() > 0)


def outer_bound_radius(direction, catalog: ScheduleCatalog) -> float:
    """Largest ``a`` with ``a * direction`` in the outer bound (an LP)."""
    d = _check_direction(direction, catalog.J)
    scheds = catalog.schedules
    n = len(scheds)
    V = np.zeros((catalog.J, n))
    for i, s in enumerate(scheds[1:], start=1):
        V[:, i] = catalog.rates[s]
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-V, d[:, None]])
    A_eq = np.zeros((1, n + 1))
    A_eq[0, :n] = 1.0
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(catalog.J), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * (n + 1), method="highs")
    if res.status != 0:
        raise MacStabError(f"LP solver failed: {res.message}")
    return float(res.x[-1])


def sample_capacity_interior(P: Sequence[float], sigma2: float, n: int, rng: np.random.Generator,
                             eps: float = 0.01, max_tries: int = 10**5) -> list:
    """Rejection-sample ``n`` nat-rate points ``r`` with ``r + eps`` inside the capacity region."""
    upper = np.array([math.log1p(p / sigma2) for p in P])
    out, tries = [], 0
    while len(out) < n:
        if tries >= max_tries:
            raise MacStabError(f"rejection sampling gave up after {max_tries} draws")
        tries += 1
        r = tuple(float(v) for v in rng.random(len(P)) * upper)
        if capacity_membership(tuple(v + eps for v in r), P, sigma2) is Verdict.INSIDE:
            out.append(r)
    return out


def verify_capacity_interpretation(P: Sequence[float], sigma2: float, n: int, seed: int,
                                   eps: float = 0.01, k_max: int = 64,
                                   extra_points: Sequence = ()) -> dict:
    """Check both inclusions between the asymptotic boxes and the capacity interior.

    Forward: each sampled interior point gets a schedule whose box corner
    strictly dominates it. Reverse: points drawn inside the boxes of random
    schedules (total <= ``k_max``) are inside the capacity region.
    Injected ``extra_points`` without room for ``eps`` are skipped.
    """
    rng = np.random.default_rng(seed)
    J = len(P)
    report = {"forward_pass": 0, "forward_fail": 0, "reverse_pass": 0, "reverse_fail": 0,
              "skipped": 0, "worst_forward_margin": None, "worst_reverse_margin": None,
              "failures": []}
    points = sample_capacity_interior(P, sigma2, n, rng, eps) if n else []
    for r in extra_points:
        r = tuple(float(v) for v in r)
        if capacity_membership(tuple(v + eps for v in r), P, sigma2) is Verdict.INSIDE:
            points.append(r)
        else:
            report["skipped"] += 1
    worst = math.inf
    for r in points:
        try:
            s = schedule_for_rate(r, P, sigma2, eps, k_max)
            corner = coding.asymptotic_rate(P, sigma2, s)
            m = min((corner[j] - r[j] for j in range(J) if r[j] > 0), default=math.inf)
        except KBudgetExceeded as exc:
            s, m = None, exc.best_margin
        worst = min(worst, m)
        if m > 0:
            report["forward_pass"] += 1
        else:
            report["forward_fail"] += 1
            report["failures"].append({"direction": "forward", "rate": list(r),
                                       "schedule": list(s) if s else None, "margin": m})
    worst_rev = math.inf
    for _ in range(len(points)):
        while True:
            s = tuple(int(v) for v in rng.integers(0, k_max + 1, size=J))
            if any(s) and sum(s) <= k_max:
                break
        corner = coding.asymptotic_rate(P, sigma2, s)
        x = tuple(float(c * u) for c, u in zip(corner, rng.random(J)))
        m = min(capacity_margins(RateVector(x, NAT), P, sigma2).values())
        worst_rev = min(worst_rev, m)
        if m > TOL:
            report["reverse_pass"] += 1
        else:
            report["reverse_fail"] += 1
            report["failures"].append({"direction": "reverse", "rate": list(x),
                                       "schedule": list(s), "margin": m})
    if points:
        report["worst_forward_margin"] = worst
        report["worst_reverse_margin"] = worst_rev
    return report
