"""Event-driven forward simulation of splitting trees with Poissonian mutations."""
import enum
import heapq
import logging
import math
from dataclasses import dataclass

import numpy as np

from config import Config
from engines.scale import eval_W
from models import DescentOutcome, ForwardOutcome, IndividualRecord, SpectrumSample
from utils.errors import DomainError

logger = logging.getLogger(__name__)


class Event(enum.IntEnum):
    DEATH = 0
    BIRTH = 1
    MUTATION = 2


@dataclass
class Population:
    births: np.ndarray
    deaths: np.ndarray
    parents: np.ndarray
    types: np.ndarray
    overflow: bool

    def alive_at(self, t):
        return (self.births <= t) & (self.deaths > t)


def run_population(params, horizon, cap, rng, mutations=True):
    """Simulate from one root at time 0 up to horizon.

    Each individual draws its lifetime at birth; births (rate b) and mutations (rate theta)
    are exponential races against that fixed death time. Events are processed in time
    order from a heap, so individuals are indexed by birth time and parents precede
    their children.
    """
    births, deaths, parents, types = [], [], [], []
    queue = []
    sequence = 0
    alive = 0
    next_type = 1
    birth_scale = 1.0 / params.b
    mutation_scale = 1.0 / params.theta if mutations and params.theta > 0 else None

    def schedule(time, kind, individual):
        nonlocal sequence
        heapq.heappush(queue, (time, sequence, kind, individual))
        sequence += 1

    def spawn(parent, time, type_id):
        nonlocal alive
        index = len(births)
        death = time + params.lifespan.sample(rng)
        births.append(time)
        deaths.append(death)
        parents.append(parent)
        types.append(type_id)
        alive += 1
        limit = min(death, horizon)
        if death <= horizon:
            schedule(death, Event.DEATH, index)
        first_birth = time + rng.exponential(birth_scale)
        if first_birth < limit:
            schedule(first_birth, Event.BIRTH, index)
        if mutation_scale is not None:
            first_mutation = time + rng.exponential(mutation_scale)
            if first_mutation < limit:
                schedule(first_mutation, Event.MUTATION, index)

    spawn(-1, 0.0, 0)
    overflow = False
    while queue:
        time, _, kind, individual = heapq.heappop(queue)
        if kind == Event.DEATH:
            alive -= 1
            continue
        limit = min(deaths[individual], horizon)
        if kind == Event.BIRTH:
            spawn(individual, time, types[individual])
            if alive > cap:
                overflow = True
                break
            following = time + rng.exponential(birth_scale)
            if following < limit:
                schedule(following, Event.BIRTH, individual)
        else:
            types[individual] = next_type
            next_type += 1
            following = time + rng.exponential(mutation_scale)
            if following < limit:
                schedule(following, Event.MUTATION, individual)

    if overflow:
        logger.warning("forward run exceeded the population cap of %d", cap)
    return Population(
        births=np.asarray(births),
        deaths=np.asarray(deaths),
        parents=np.asarray(parents, dtype=np.int64),
        types=np.asarray(types, dtype=np.int64),
        overflow=overflow,
    )


def population_records(population):
    return tuple(
        IndividualRecord(id=i, parent=int(p), birth=float(b), death=float(d), type=int(k))
        for i, (p, b, d, k) in enumerate(zip(population.parents, population.births,
                                              population.deaths, population.types))
    )


def _spectrum_of(types):
    clonal = int(np.count_nonzero(types == 0))
    _, sizes = np.unique(types[types != 0], return_counts=True)
    spectrum = np.bincount(sizes, minlength=1)
    A = {int(k): int(c) for k, c in enumerate(spectrum) if k and c}
    return SpectrumSample(N=int(types.size), Z0=clonal, A=A)


def simulate_forward(params, t, cap, rng, keep_records=False):
    """SpectrumSample of the population alive at t, with survival and overflow flags."""
    if not t > 0:
        raise DomainError(f"t must be > 0, got {t}")
    if not cap > 0:
        raise DomainError(f"cap must be > 0, got {cap}")
    population = run_population(params, t, cap, rng)
    records = population_records(population) if keep_records else ()
    if population.overflow:
        return ForwardOutcome(sample=None, survived=True, overflow=True, records=records)
    sample = _spectrum_of(population.types[population.alive_at(t)])
    return ForwardOutcome(sample=sample, survived=sample.N > 0, overflow=False, records=records)


def _with_descent(population, T):
    """Mark individuals having at least one descendant (themselves included) alive at T."""
    marked = population.deaths > T
    parents = population.parents
    for i in range(parents.size - 1, 0, -1):
        if marked[i]:
            marked[parents[i]] = True
    return marked


def _population_cap(cap):
    cap = Config.POPULATION_CAP if cap is None else cap
    if not cap > 0:
        raise DomainError(f"cap must be > 0, got {cap}")
    return cap


def infinite_descent_counts(params, checkpoints, T, rng, cap=None):
    """Counts N^(T)_t of individuals alive at each checkpoint t with descent alive at T.

    cap defaults to Config.POPULATION_CAP; an overflowing run reports zero counts.
    """
    checkpoints = np.atleast_1d(np.asarray(checkpoints, dtype=float))
    if checkpoints.size == 0 or checkpoints.max() >= T or checkpoints.min() < 0:
        raise DomainError("checkpoints must lie in [0, T)")
    population = run_population(params, T, _population_cap(cap), rng, mutations=False)
    if population.overflow:
        return DescentOutcome(counts=np.zeros(checkpoints.size, dtype=np.int64), survived=True, overflow=True)
    marked = _with_descent(population, T)
    counts = np.array([
        np.count_nonzero(marked & population.alive_at(t)) for t in checkpoints
    ], dtype=np.int64)
    return DescentOutcome(counts=counts, survived=bool(marked[0]), overflow=False)


def descent_transition_probability(gridW, s, T):
    """Geometric parameter W(T - s)/W(T) of N^(T)_s under survival at T"""
    if not 0 <= s <= T:
        raise DomainError(f"checkpoint {s} must lie in [0, {T}]")
    return float(eval_W(gridW, T - s) / eval_W(gridW, T))


def contour_order(population, t):
    """Indices of the individuals alive at t in the order of the coalescent point process.

    Depth-first from the root, a parent before its children, younger children first.
    """
    size = population.parents.size
    children = [[] for _ in range(size)]
    for child in range(1, size):
        children[population.parents[child]].append(child)

    alive = population.alive_at(t)
    order = []
    stack = [0]
    while stack:
        node = stack.pop()
        if alive[node]:
            order.append(node)
        # pushed oldest first, so the youngest child is explored next
        stack.extend(children[node])
    return np.asarray(order, dtype=np.int64)


def residual_lifetimes(params, t, rng, cap=None):
    """Overshoots death - t of the individuals alive at t, in contour order."""
    if not t > 0:
        raise DomainError(f"t must be > 0, got {t}")
    population = run_population(params, t, _population_cap(cap), rng, mutations=False)
    if population.overflow:
        return np.empty(0)
    return population.deaths[contour_order(population, t)] - t


def checkpoint_mean_ratio(gridW, s1, s2, T):
    """E[N^(T)_{s2} | N^(T)_{s1} = m] / m = W(T - s1)/W(T - s2) for s1 <= s2 < T"""
    if not 0 <= s1 <= s2 < T:
        raise DomainError("checkpoints must satisfy 0 <= s1 <= s2 < T")
    return float(eval_W(gridW, T - s1) / eval_W(gridW, T - s2))


def immortal_horizon(t, alpha, margin=5.0):
    """Default horizon T = t + margin/alpha for the infinite-descent proxy"""
    if alpha <= 0:
        raise DomainError("infinite descent needs alpha > 0")
    return t + margin / alpha if math.isfinite(alpha) else t + margin
