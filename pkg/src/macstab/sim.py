"""Slotted simulation of the multi-queue system under a state-independent policy.

Each arrival at queue ``j`` is committed once to a class ``(j, s)`` drawn
from the policy's splitting distribution and is only ever sent as part of a
joint codeword of schedule ``s`` (length ``N(s)``). Every slot, in order:

1. batch arrivals land and are classed (eligible in the same slot);
2. one schedule is drawn from ``p`` independent of the state;
3. an ongoing transmission of that schedule is served, or else a new
   joint message is formed from up to ``s_j`` fresh messages per class and
   its first slot is served, or else nothing happens.

Randomness comes from three independent substreams (arrivals, class
assignment, schedule draw) spawned from one seed.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, DriftViolation, MacStabError
from .regions import PolicySpec, ScheduleCatalog

SLOPE_TOL = 1e-3
CHUNK = 1 << 16


class InvariantViolation(MacStabError):
    pass


# --- arrivals -----------------------------------------------------------------

@dataclass(frozen=True)
class Batch:
    """Batch-size distribution for one queue."""

    kind: str
    param: object

    def __post_init__(self):
        if self.kind == "bernoulli":
            if not 0.0 <= self.param <= 1.0:
                raise DomainError("bernoulli parameter must lie in [0, 1]")
        elif self.kind == "poisson":
            if self.param < 0:
                raise DomainError("poisson mean must be non-negative")
        elif self.kind == "deterministic":
            if int(self.param) != self.param or self.param < 0:
                raise DomainError("deterministic batch must be a non-negative integer")
        elif self.kind == "pmf":
            pmf = tuple(float(v) for v in self.param)
            if not pmf or any(v < 0 for v in pmf) or abs(sum(pmf) - 1.0) > 1e-9:
                raise DomainError("pmf must be non-negative and sum to one")
            object.__setattr__(self, "param", pmf)
        else:
            raise DomainError(f"unknown batch distribution {self.kind!r}")

    @property
    def mean(self) -> float:
        if self.kind in ("bernoulli", "poisson", "deterministic"):
            return float(self.param)
        return sum(k * v for k, v in enumerate(self.param))

    @property
    def second_moment(self) -> float:
        a = self.param
        if self.kind == "bernoulli":
            return float(a)
        if self.kind == "poisson":
            return a + a * a
        if self.kind == "deterministic":
            return float(a * a)
        return sum(k * k * v for k, v in enumerate(a))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "bernoulli":
            return (rng.random(size) < self.param).astype(np.int64)
        if self.kind == "poisson":
            return rng.poisson(self.param, size).astype(np.int64)
        if self.kind == "deterministic":
            return np.full(size, int(self.param), dtype=np.int64)
        return rng.choice(len(self.param), size=size, p=self.param).astype(np.int64)

    def to_dict(self):
        return {"kind": self.kind, "param": list(self.param) if self.kind == "pmf" else self.param}


def bernoulli(q):
    return Batch("bernoulli", float(q))


def poisson(lam):
    return Batch("poisson", float(lam))


def deterministic(a):
    return Batch("deterministic", int(a))


def finite_pmf(pmf):
    return Batch("pmf", tuple(pmf))


@dataclass(frozen=True)
class ArrivalModel:
    queues: tuple

    def __post_init__(self):
        object.__setattr__(self, "queues", tuple(self.queues))

    @property
    def means(self) -> tuple:
        return tuple(b.mean for b in self.queues)

    @property
    def second_moments(self) -> tuple:
        return tuple(b.second_moment for b in self.queues)


# --- state --------------------------------------------------------------------

@dataclass
class SystemState:
    """Fresh counts per class plus one ongoing-transmission record per schedule.

    Lists are indexed by position in ``schedules`` (the catalog's serving
    schedules) and then by queue. ``t[i] > 0`` marks an ongoing
    transmission of schedule ``i`` carrying ``x[i][j]`` messages of queue
    ``j``; a class's remaining time is ``t[i]`` if it has a message in that
    transmission and zero otherwise.
    """

    schedules: tuple
    fresh: list
    x: list
    t: list

    @classmethod
    def empty(cls, catalog: ScheduleCatalog) -> "SystemState":
        scheds = tuple(catalog.serving)
        J = catalog.J
        return cls(scheds, [[0] * J for _ in scheds], [[0] * J for _ in scheds],
                   [0] * len(scheds))

    def copy(self) -> "SystemState":
        return SystemState(self.schedules, [row[:] for row in self.fresh],
                           [row[:] for row in self.x], self.t[:])

    def index(self, s) -> int:
        return self.schedules.index(tuple(s))

    def backlog(self) -> int:
        return sum(map(sum, self.fresh)) + sum(map(sum, self.x))

    def remaining(self, j: int, i: int) -> int:
        return self.t[i] if self.x[i][j] > 0 else 0


def lyapunov_c(state: SystemState, catalog: ScheduleCatalog) -> float:
    """``1 + sum_js (N(s) n_js + s_j t_js)``."""
    total = 1
    for i, s in enumerate(state.schedules):
        n = catalog.lengths[s]
        fresh, x, t = state.fresh[i], state.x[i], state.t[i]
        for j, sj in enumerate(s):
            if sj:
                total += n * fresh[j] + (sj * t if x[j] > 0 else 0)
    return float(total)


def _class_c(state, catalog):
    for i, s in enumerate(state.schedules):
        n = catalog.lengths[s]
        for j, sj in enumerate(s):
            if sj:
                yield j, i, s, n * state.fresh[i][j] + (sj * state.t[i] if state.x[i][j] > 0 else 0)


def drift_denominators(policy: PolicySpec, arrivals: ArrivalModel,
                       catalog: ScheduleCatalog) -> dict:
    """``p(s) s_j - E[A_j] mu_js N(s)`` for every class the policy uses.

    Raises ``DriftViolation`` on the first non-positive entry.
    """
    means = arrivals.means
    out = {}
    for j, split in policy.mu.items():
        for s, m in split.items():
            if m <= 0:
                continue
            d = policy.p.get(s, 0.0) * s[j] - means[j] * m * catalog.lengths[s]
            if d <= 0:
                raise DriftViolation(j, s, d)
            out[(j, s)] = d
    for j, a in enumerate(means):
        if a > 0 and not policy.mu.get(j):
            raise DriftViolation(j, None, 0.0)
    return out


def lyapunov_V(state: SystemState, policy: PolicySpec, arrivals: ArrivalModel,
               catalog: ScheduleCatalog) -> float:
    """Quadratic Lyapunov function ``sum_js c_js^2 / (2 (p(s) s_j - E[A_js] N(s)))``."""
    denom = drift_denominators(policy, arrivals, catalog)
    return _quadratic(state, catalog, denom)


def _quadratic(state, catalog, denom):
    total = 0.0
    for j, _, s, c in _class_c(state, catalog):
        if c == 0:
            continue
        d = denom.get((j, s))
        if d is None:
            raise DriftViolation(j, s, 0.0)
        total += c * c / (2.0 * d)
    return total


def transience_witness(state: SystemState, cls: tuple, theta: float,
                       catalog: ScheduleCatalog) -> float:
    """``1 - theta ** (N(s) n_js + x_js t_js)`` for class ``cls = (j, s)``."""
    if not 0.0 < theta < 1.0:
        raise DomainError("theta must lie in (0, 1)")
    j, s = cls
    i = state.index(s)
    expo = catalog.lengths[tuple(s)] * state.fresh[i][j] + state.x[i][j] * state.t[i]
    return 1.0 - theta ** expo


# --- dynamics -----------------------------------------------------------------

class _Plan:
    """Index tables derived once from (policy, catalog)."""

    def __init__(self, policy: PolicySpec, catalog: ScheduleCatalog, state: SystemState):
        if tuple(catalog.serving) != state.schedules:
            raise DomainError("state was built for a different catalog")
        for s in policy.p:
            if tuple(s) not in catalog.lengths:
                raise DomainError(f"policy schedule {s} is not in the catalog")
        self.J = catalog.J
        self.scheds = state.schedules
        self.lengths = [catalog.lengths[s] for s in self.scheds]
        self.active = [tuple(j for j, v in enumerate(s) if v) for s in self.scheds]
        probs = [policy.p.get(s, 0.0) for s in self.scheds]
        idle = max(0.0, 1.0 - sum(probs))
        self.draw_p = np.array(probs + [idle])
        self.draw_p /= self.draw_p.sum()
        self.idle_index = len(self.scheds)
        pos = {s: i for i, s in enumerate(self.scheds)}
        self.class_idx = []
        self.class_p = []
        for j in range(self.J):
            split = policy.mu.get(j, {})
            self.class_idx.append(np.array([pos[s] for s in split], dtype=np.int64))
            self.class_p.append(np.array(list(split.values()), dtype=float))


def _serve(state, plan, i):
    """Act on drawn schedule ``i``; returns (case, implemented schedule, departures)."""
    t = state.t
    if t[i] > 0:
        t[i] -= 1
        if t[i] == 0:
            gone = state.x[i]
            state.x[i] = [0] * plan.J
            return 3, None, gone
        return 3, None, None
    fresh = state.fresh[i]
    s = plan.scheds[i]
    sprime = [0] * plan.J
    any_fresh = False
    for j in plan.active[i]:
        k = fresh[j] if fresh[j] < s[j] else s[j]
        if k:
            sprime[j] = k
            fresh[j] -= k
            any_fresh = True
    if not any_fresh:
        return 1, None, None
    t[i] = plan.lengths[i] - 1
    if t[i] == 0:
        return 2, sprime, sprime
    state.x[i] = sprime
    return 2, sprime, None


@dataclass
class SlotEvents:
    arrivals: dict
    drawn: Optional[tuple]
    implemented: Optional[tuple]
    case: int
    departures: dict


def _streams(seed):
    ss = np.random.SeedSequence(seed)
    arr, cls, sch = ss.spawn(3)
    return {"arrivals": np.random.default_rng(arr), "classes": np.random.default_rng(cls),
            "schedule": np.random.default_rng(sch)}


def make_streams(seed: int) -> dict:
    """Named RNG substreams used by ``step`` and ``run``."""
    return _streams(seed)


def step(state: SystemState, policy: PolicySpec, arrivals: ArrivalModel,
         catalog: ScheduleCatalog, streams: dict, plan: Optional[_Plan] = None):
    """Advance one slot in place; returns ``(state, SlotEvents)``."""
    plan = plan or _Plan(policy, catalog, state)
    counts = [int(b.sample(streams["arrivals"], 1)[0]) for b in arrivals.queues]
    arrived = {}
    for j, a in enumerate(counts):
        if not a:
            continue
        if not len(plan.class_idx[j]):
            raise DomainError(f"arrival at queue {j}, which the policy never serves")
        for i in streams["classes"].choice(plan.class_idx[j], size=a, p=plan.class_p[j]):
            state.fresh[i][j] += 1
            key = (j, plan.scheds[i])
            arrived[key] = arrived.get(key, 0) + 1
    d = int(streams["schedule"].choice(len(plan.draw_p), p=plan.draw_p))
    if d == plan.idle_index:
        return state, SlotEvents(arrived, None, None, 0, {})
    case, sprime, gone = _serve(state, plan, d)
    s = plan.scheds[d]
    departed = {(j, s): v for j, v in enumerate(gone) if v} if gone else {}
    return state, SlotEvents(arrived, s, tuple(sprime) if sprime else None, case, departed)


# --- runs ---------------------------------------------------------------------

@dataclass
class SimStats:
    horizon: int
    seed: int
    schedules: tuple
    arrivals: np.ndarray            # [schedule index, queue]
    departures: np.ndarray
    present: np.ndarray
    drawn: np.ndarray               # slots in which each schedule was drawn
    served: np.ndarray              # slots in which each schedule was transmitting
    idle_draws: int
    checkpoints: np.ndarray
    backlog_series: np.ndarray
    c_series: np.ndarray
    mean_backlog: float
    last_half_mean: float
    last_quarter_mean: float
    slope: float
    digest: str
    violations: list = field(default_factory=list)

    @property
    def departure_rate(self) -> np.ndarray:
        """Per-queue departures per slot."""
        return self.departures.sum(axis=0) / self.horizon

    @property
    def class_departure_rate(self) -> np.ndarray:
        return self.departures / self.horizon

    @property
    def verdict(self) -> str:
        return stability_verdict(self.slope, self.last_half_mean, self.last_quarter_mean)

    def summary(self) -> dict:
        return {
            "horizon": self.horizon,
            "seed": self.seed,
            "verdict": self.verdict,
            "slope": self.slope,
            "mean_backlog": self.mean_backlog,
            "last_half_mean": self.last_half_mean,
            "last_quarter_mean": self.last_quarter_mean,
            "arrivals": self.arrivals.sum(axis=0).tolist(),
            "departures": self.departures.sum(axis=0).tolist(),
            "departure_rate": self.departure_rate.tolist(),
            "schedules": [list(s) for s in self.schedules],
            "drawn": self.drawn.tolist(),
            "served": self.served.tolist(),
            "idle_draws": self.idle_draws,
            "digest": self.digest,
            "violations": len(self.violations),
        }


def stability_verdict(slope, half_mean, quarter_mean, slope_tol=SLOPE_TOL) -> str:
    if slope > 5 * slope_tol:
        return "transient-like"
    if slope < slope_tol:
        if half_mean == 0 and quarter_mean == 0:
            return "stable-like"
        if abs(quarter_mean - half_mean) <= 0.1 * half_mean:
            return "stable-like"
    return "inconclusive"


def check_invariants(state: SystemState, catalog: ScheduleCatalog,
                     arrived: np.ndarray, departed: np.ndarray) -> list:
    """Return a list of human-readable invariant violations (empty when sound)."""
    bad = []
    for i, s in enumerate(state.schedules):
        n = catalog.lengths[s]
        t = state.t[i]
        if not 0 <= t <= n:
            bad.append(f"t={t} outside [0, {n}] for {s}")
        for j, sj in enumerate(s):
            x = state.x[i][j]
            if x > sj or x < 0:
                bad.append(f"x={x} exceeds s_j={sj} for class ({j}, {s})")
            if sj == 0 and (x or state.fresh[i][j]):
                bad.append(f"messages in non-class ({j}, {s})")
            if t == 0 and x:
                bad.append(f"inactive record for {s} still holds messages")
            if state.fresh[i][j] < 0:
                bad.append(f"negative fresh count for ({j}, {s})")
            if arrived[i, j] != departed[i, j] + state.fresh[i][j] + x:
                bad.append(f"conservation broken for class ({j}, {s})")
        if t > 0 and not any(state.x[i]):
            bad.append(f"active record for {s} carries no messages")
    return bad


def run(catalog: ScheduleCatalog, policy: PolicySpec, arrivals: ArrivalModel,
        horizon: int, seed: int, decimation: int = 10_000, check: bool = True,
        state: Optional[SystemState] = None) -> SimStats:
    """Simulate ``horizon`` slots from the empty state (or ``state``)."""
    if horizon < 1:
        raise DomainError("horizon must be at least one slot")
    if len(arrivals.queues) != catalog.J:
        raise DomainError("arrival model and catalog differ in dimension")
    state = state.copy() if state is not None else SystemState.empty(catalog)
    plan = _Plan(policy, catalog, state)
    for j, b in enumerate(arrivals.queues):
        if b.mean > 0 and not len(plan.class_idx[j]):
            raise DomainError(f"queue {j} receives traffic but the policy never serves it")
    streams = _streams(seed)
    J, S = catalog.J, len(plan.scheds)
    arrived = np.zeros((S, J), dtype=np.int64)
    departed = np.zeros((S, J), dtype=np.int64)
    for i in range(S):
        for j in range(J):
            arrived[i, j] = state.fresh[i][j] + state.x[i][j]
    arr_l = arrived.tolist()
    dep_l = departed.tolist()
    drawn = [0] * (S + 1)
    served = [0] * S
    backlog = np.empty(horizon, dtype=np.int64)
    n_points = max(1, min(decimation, horizon))
    marks = np.unique(np.linspace(0, horizon - 1, n_points).astype(np.int64))
    mark_set = set(marks.tolist())
    cps, cvals, bvals = [], [], []
    violations = []
    h = hashlib.blake2b(digest_size=16)
    h.update(repr((horizon, seed, plan.scheds, plan.draw_p.tolist())).encode())
    fresh, xs, ts = state.fresh, state.x, state.t
    lengths, act, scheds, idle = plan.lengths, plan.active, plan.scheds, plan.idle_index
    cur = state.backlog()

    for start in range(0, horizon, CHUNK):
        size = min(CHUNK, horizon - start)
        counts = np.stack([b.sample(streams["arrivals"], size) for b in arrivals.queues], axis=1)
        draws = streams["schedule"].choice(S + 1, size=size, p=plan.draw_p)
        classes = []
        for j in range(J):
            total = int(counts[:, j].sum())
            if total and len(plan.class_idx[j]):
                classes.append(iter(streams["classes"].choice(
                    plan.class_idx[j], size=total, p=plan.class_p[j]).tolist()))
            else:
                classes.append(iter(()))
        events = np.zeros((size, 2), dtype=np.int64)
        counts_l = counts.tolist()
        draws_l = draws.tolist()
        for k in range(size):
            row = counts_l[k]
            for j in range(J):
                a = row[j]
                if a:
                    cl = classes[j]
                    for _ in range(a):
                        i = next(cl)
                        fresh[i][j] += 1
                        arr_l[i][j] += 1
                    cur += a
            d = draws_l[k]
            drawn[d] += 1
            if d != idle:
                if ts[d] > 0:
                    served[d] += 1
                    ts[d] -= 1
                    if ts[d] == 0:
                        gone = xs[d]
                        xs[d] = [0] * J
                        out = 0
                        for j in act[d]:
                            dep_l[d][j] += gone[j]
                            out += gone[j]
                        cur -= out
                        events[k, 1] = out
                    events[k, 0] = 3
                else:
                    fr = fresh[d]
                    s = scheds[d]
                    sprime = None
                    for j in act[d]:
                        v = fr[j] if fr[j] < s[j] else s[j]
                        if v:
                            if sprime is None:
                                sprime = [0] * J
                            sprime[j] = v
                            fr[j] -= v
                    if sprime is not None:
                        served[d] += 1
                        events[k, 0] = 2
                        n = lengths[d] - 1
                        if n == 0:
                            out = 0
                            for j in act[d]:
                                dep_l[d][j] += sprime[j]
                                out += sprime[j]
                            cur -= out
                            events[k, 1] = out
                        else:
                            ts[d] = n
                            xs[d] = sprime
                    else:
                        events[k, 0] = 1
            backlog[start + k] = cur
            if (start + k) in mark_set:
                cps.append(start + k)
                bvals.append(cur)
                cvals.append(lyapunov_c(state, catalog))
                if check:
                    bad = check_invariants(state, catalog, np.array(arr_l), np.array(dep_l))
                    if bad:
                        violations.extend(f"slot {start + k}: {m}" for m in bad)
        h.update(counts.tobytes())
        h.update(draws.astype(np.int64).tobytes())
        h.update(events.tobytes())
        h.update(backlog[start:start + size].tobytes())

    arrived = np.array(arr_l, dtype=np.int64)
    departed = np.array(dep_l, dtype=np.int64)
    present = np.array([[fresh[i][j] + xs[i][j] for j in range(J)] for i in range(S)],
                       dtype=np.int64).reshape(S, J)
    half = horizon // 2
    quarter = (3 * horizon) // 4
    tail = backlog[half:]
    if len(tail) >= 2:
        slope = float(np.polyfit(np.arange(half, horizon, dtype=float), tail.astype(float), 1)[0])
    else:
        slope = 0.0
    if check and violations:
        raise InvariantViolation("; ".join(violations[:5]))
    return SimStats(
        horizon=horizon, seed=seed, schedules=plan.scheds,
        arrivals=arrived, departures=departed, present=present,
        drawn=np.array(drawn[:S]), served=np.array(served), idle_draws=drawn[S],
        checkpoints=np.array(cps), backlog_series=np.array(bvals), c_series=np.array(cvals),
        mean_backlog=float(backlog.mean()),
        last_half_mean=float(tail.mean()),
        last_quarter_mean=float(backlog[quarter:].mean()),
        slope=slope, digest=h.hexdigest(), violations=violations,
    )


# --- drift probing ------------------------------------------------------------

@dataclass
class DriftProbe:
    c: float
    mean_dV: float
    stderr: float


@dataclass
class DriftReport:
    probes: list
    b: float

    def violations(self, b: float, n_se: float = 3.0) -> list:
        """Probes whose drift exceeds ``-c + b`` by more than ``n_se`` standard errors."""
        return [p for p in self.probes if p.mean_dV > -p.c + b + n_se * p.stderr]


def empirical_drift(states: Sequence[SystemState], policy: PolicySpec,
                    arrivals: ArrivalModel, catalog: ScheduleCatalog,
                    reps: int = 10_000, seed: int = 0) -> DriftReport:
    """Monte Carlo one-step drift of the quadratic Lyapunov function.

    ``b`` is the smallest constant with ``mean dV <= -c + b`` over the probes.
    """
    if reps < 1000:
        raise DomainError("reps must be at least 1000")
    denom = drift_denominators(policy, arrivals, catalog)
    probes = []
    for idx, base in enumerate(states):
        plan = _Plan(policy, catalog, base)
        streams = _streams((seed, idx))
        v0 = _quadratic(base, catalog, denom)
        counts = np.stack([b.sample(streams["arrivals"], reps) for b in arrivals.queues], axis=1)
        draws = streams["schedule"].choice(len(plan.draw_p), size=reps, p=plan.draw_p).tolist()
        classes = [iter(streams["classes"].choice(plan.class_idx[j], size=int(counts[:, j].sum()),
                                                  p=plan.class_p[j]).tolist())
                   if len(plan.class_idx[j]) else iter(())
                   for j in range(catalog.J)]
        dv = np.empty(reps)
        for r, row in enumerate(counts.tolist()):
            st = base.copy()
            for j, a in enumerate(row):
                for _ in range(a):
                    st.fresh[next(classes[j])][j] += 1
            d = draws[r]
            if d != plan.idle_index:
                _serve(st, plan, d)
            dv[r] = _quadratic(st, catalog, denom) - v0
        probes.append(DriftProbe(lyapunov_c(base, catalog), float(dv.mean()),
                                 float(dv.std(ddof=1) / math.sqrt(reps))))
    b = max((p.mean_dV + p.c for p in probes), default=0.0)
    return DriftReport(probes, b)
