"""Evolutionary engines over variable-length route-set genomes: an elitist
non-dominated-sorting multi-objective search and a classic single-objective
GA over any scalarized objective."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .evaluation import EvalContext, ObjectiveVector
from .graphs import BusNetwork
from .routegen import RoutePool

Vector = Sequence[float]


class InfeasiblePoolError(RuntimeError):
    """The route pool cannot populate a single feasible genome."""


@dataclass
class Individual:
    genome: BusNetwork
    objectives: Optional[ObjectiveVector] = None
    fitness: Optional[float] = None
    rank: Optional[int] = None
    crowding: float = 0.0


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 200
    iterations: int = 300
    mutation_prob: float = 0.1
    crossover_prob: float = 0.8
    min_routes: int = 200
    max_routes: int = 400
    seed: int = 1

    def __post_init__(self) -> None:
        if not (0.0 <= self.mutation_prob <= 1.0 and 0.0 <= self.crossover_prob <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.min_routes < 1 or self.max_routes < self.min_routes:
            raise ValueError("route-count bounds inconsistent")
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")


# -- dominance machinery ------------------------------------------------------


def dominates(a: Vector, b: Vector) -> bool:
    """a dominates b: no component worse, at least one strictly better (minimization)."""
    if len(a) != len(b):
        raise ValueError("objective vectors must share dimensionality")
    strict = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            strict = True
    return strict


def nondominated_sort(vectors: Sequence[Vector]) -> list[list[int]]:
    """Fast non-dominated sort into fronts F1, F2, ... of indices."""
    if not vectors:
        raise ValueError("population must be non-empty")
    n = len(vectors)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    counts = [0] * n
    for i in range(n):
        vi = vectors[i]
        for j in range(i + 1, n):
            vj = vectors[j]
            if dominates(vi, vj):
                dominated_by[i].append(j)
                counts[j] += 1
            elif dominates(vj, vi):
                dominated_by[j].append(i)
                counts[i] += 1
    fronts: list[list[int]] = []
    current = [i for i in range(n) if counts[i] == 0]
    while current:
        fronts.append(current)
        nxt: list[int] = []
        for i in current:
            for j in dominated_by[i]:
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(j)
        current = sorted(nxt)
    return fronts


def crowding_distance(front: Sequence[Vector]) -> list[float]:
    """Deb-style crowding: boundary points infinite, interior points sum
    normalized gaps to their sorted neighbours per objective; degenerate
    objectives (max == min) contribute nothing."""
    n = len(front)
    if n == 0:
        raise ValueError("front must be non-empty")
    if n <= 2:
        return [math.inf] * n
    m = len(front[0])
    dist = [0.0] * n
    for obj in range(m):
        order = sorted(range(n), key=lambda i: front[i][obj])
        lo = front[order[0]][obj]
        hi = front[order[-1]][obj]
        dist[order[0]] = math.inf
        dist[order[-1]] = math.inf
        span = hi - lo
        if span <= 0:
            continue
        for pos in range(1, n - 1):
            i = order[pos]
            if dist[i] != math.inf:
                dist[i] += (front[order[pos + 1]][obj] - front[order[pos - 1]][obj]) / span
    return dist


# -- genome operators ---------------------------------------------------------


def random_network(pool: RoutePool, cfg: GAConfig, rng: random.Random) -> BusNetwork:
    """Randomly sized genome with routes drawn uniformly from the pool."""
    ids = pool.mutable_ids()
    lo = cfg.min_routes
    hi = min(cfg.max_routes, len(ids))
    if len(ids) < lo:
        raise InfeasiblePoolError(
            f"pool has {len(ids)} selectable routes, fewer than min_routes={lo}"
        )
    size = rng.randint(lo, hi)
    return BusNetwork.of(rng.sample(ids, size))


def repair(genome: BusNetwork, pool: RoutePool, cfg: GAConfig, rng: random.Random) -> BusNetwork:
    """Clamp a genome back into the route-count bounds (constraints stay hard)."""
    ids = set(genome.route_ids)
    pool_ids = pool.mutable_ids()
    ids.intersection_update(pool_ids)
    while len(ids) > cfg.max_routes:
        ids.remove(rng.choice(sorted(ids)))
    if len(ids) < cfg.min_routes:
        free = sorted(set(pool_ids) - ids)
        need = cfg.min_routes - len(ids)
        if len(free) < need:
            raise InfeasiblePoolError("pool too small to repair genome to min_routes")
        ids.update(rng.sample(free, need))
    return BusNetwork.of(ids)


def validate_genome(genome: BusNetwork, pool: RoutePool, cfg: GAConfig) -> None:
    n = len(genome)
    if not (cfg.min_routes <= n <= cfg.max_routes):
        raise AssertionError(f"genome has {n} routes outside [{cfg.min_routes}, {cfg.max_routes}]")
    for rid in genome.route_ids:
        route = pool.routes.get(rid)
        if route is None:
            raise AssertionError(f"genome references unknown route {rid}")
        if route.is_fixed:
            raise AssertionError(f"genome selects fixed route {rid}")


def mutate(
    genome: BusNetwork, pool: RoutePool, cfg: GAConfig, rng: random.Random
) -> BusNetwork:
    """With probability ``mutation_prob``, apply one of swap / insert / delete,
    re-drawing the action when bounds make it infeasible."""
    if rng.random() >= cfg.mutation_prob:
        return genome
    ids = set(genome.route_ids)
    pool_ids = pool.mutable_ids()
    outside = sorted(set(pool_ids) - ids)
    actions = ["swap", "insert", "delete"]
    rng.shuffle(actions)
    for action in actions:
        if action == "swap" and ids and outside:
            out = rng.choice(sorted(ids))
            inc = rng.choice(outside)
            return BusNetwork.of((ids - {out}) | {inc})
        if action == "insert" and outside and len(ids) < cfg.max_routes:
            return BusNetwork.of(ids | {rng.choice(outside)})
        if action == "delete" and len(ids) > cfg.min_routes:
            return BusNetwork.of(ids - {rng.choice(sorted(ids))})
    return genome


def crossover(
    a: BusNetwork, b: BusNetwork, cfg: GAConfig, rng: random.Random
) -> tuple[BusNetwork, BusNetwork]:
    """Uniform route exchange: shared routes go to both children, the
    symmetric difference is shuffled and dealt alternately; children are then
    clamped to the route-count bounds using only routes from the union."""
    if rng.random() >= cfg.crossover_prob:
        return a, b
    shared = a.route_ids & b.route_ids
    diff = sorted(a.route_ids ^ b.route_ids)
    rng.shuffle(diff)
    child1 = set(shared)
    child2 = set(shared)
    for i, rid in enumerate(diff):
        (child1 if i % 2 == 0 else child2).add(rid)
    union = sorted(a.route_ids | b.route_ids)

    def clamp(ids: set) -> BusNetwork:
        while len(ids) > cfg.max_routes:
            ids.remove(rng.choice(sorted(ids)))
        if len(ids) < cfg.min_routes:
            free = [r for r in union if r not in ids]
            rng.shuffle(free)
            ids.update(free[: cfg.min_routes - len(ids)])
        return BusNetwork.of(ids)

    return clamp(child1), clamp(child2)


# -- archives and sampling ----------------------------------------------------


@dataclass
class ArchiveMember:
    genome: BusNetwork
    objectives: ObjectiveVector


@dataclass
class ParetoArchive:
    """Every non-dominated genome seen during a run (deduplicated)."""

    members: list[ArchiveMember] = field(default_factory=list)
    _index: dict[frozenset, ObjectiveVector] = field(default_factory=dict)

    def update(self, genome: BusNetwork, objectives: ObjectiveVector) -> None:
        if genome.route_ids in self._index:
            return
        vec = objectives.as_tuple()
        kept: list[ArchiveMember] = []
        for m in self.members:
            other = m.objectives.as_tuple()
            if dominates(other, vec):
                return
            if not dominates(vec, other):
                kept.append(m)
        kept.append(ArchiveMember(genome, objectives))
        self.members = kept
        self._index = {m.genome.route_ids: m.objectives for m in kept}

    def genomes(self) -> set[frozenset]:
        return set(self._index)

    def vectors(self) -> list[tuple[float, ...]]:
        return [m.objectives.as_tuple() for m in self.members]

    def sorted_members(self) -> list[ArchiveMember]:
        return sorted(
            self.members,
            key=lambda m: (m.objectives.as_tuple(), tuple(m.genome.sorted_ids())),
        )

    def __len__(self) -> int:
        return len(self.members)


def crowding_order(members: Sequence[ArchiveMember]) -> list[ArchiveMember]:
    """Archive members by descending crowding distance (stable, deterministic)."""
    ordered = sorted(
        members, key=lambda m: (m.objectives.as_tuple(), tuple(m.genome.sorted_ids()))
    )
    dists = crowding_distance([m.objectives.as_tuple() for m in ordered])
    return [
        m
        for _, m in sorted(
            zip(dists, ordered),
            key=lambda pair: (
                -pair[0],
                pair[1].objectives.as_tuple(),
                tuple(pair[1].genome.sorted_ids()),
            ),
        )
    ]


def sample_by_crowding(archive: ParetoArchive, n: int) -> list[tuple[str, ArchiveMember]]:
    """n members spread along the crowding order, named by their position.

    With N archive members the picks are floor(i*(N-1)/(n-1)) for i in 0..n-1,
    so a 9-sample over a 200-member archive lands on positions 0, 24, 49, 74,
    99, 124, 149, 174 and 199.
    """
    if n < 1:
        raise ValueError("sample size must be >= 1")
    ordered = crowding_order(archive.members)
    big_n = len(ordered)
    if big_n == 0:
        return []
    if n == 1 or big_n == 1:
        picks = [0]
    else:
        picks = sorted({i * (big_n - 1) // (n - 1) for i in range(n)})
    return [(f"n{i}", ordered[i]) for i in picks]


# -- engines -------------------------------------------------------------------


def _evaluate_population(pop: list[Individual], ctx: EvalContext) -> None:
    for ind in pop:
        if ind.objectives is None:
            ind.objectives = ctx.objectives(ind.genome)


def _assign_fronts(pop: list[Individual]) -> list[list[int]]:
    fronts = nondominated_sort([ind.objectives.as_tuple() for ind in pop])
    for rank, front in enumerate(fronts):
        vecs = [pop[i].objectives.as_tuple() for i in front]
        dists = crowding_distance(vecs)
        for i, d in zip(front, dists):
            pop[i].rank = rank
            pop[i].crowding = d
    return fronts


def _tournament_mo(pop: list[Individual], rng: random.Random) -> Individual:
    i, j = rng.randrange(len(pop)), rng.randrange(len(pop))
    a, b = pop[i], pop[j]
    if (a.rank, -a.crowding) <= (b.rank, -b.crowding):
        return a
    return b


def _tournament_so(pop: list[Individual], rng: random.Random) -> Individual:
    i, j = rng.randrange(len(pop)), rng.randrange(len(pop))
    return pop[i] if pop[i].fitness <= pop[j].fitness else pop[j]


def _make_children(
    pop: list[Individual],
    select: Callable[[list[Individual], random.Random], Individual],
    pool: RoutePool,
    cfg: GAConfig,
    rng: random.Random,
) -> list[Individual]:
    children: list[Individual] = []
    while len(children) < cfg.population_size:
        pa = select(pop, rng)
        pb = select(pop, rng)
        ca, cb = crossover(pa.genome, pb.genome, cfg, rng)
        for child in (ca, cb):
            child = mutate(child, pool, cfg, rng)
            child = repair(child, pool, cfg, rng)
            validate_genome(child, pool, cfg)
            children.append(Individual(genome=child))
            if len(children) == cfg.population_size:
                break
    return children


def _initial_population(pool: RoutePool, cfg: GAConfig, rng: random.Random) -> list[Individual]:
    pop = []
    for _ in range(cfg.population_size):
        genome = random_network(pool, cfg, rng)
        validate_genome(genome, pool, cfg)
        pop.append(Individual(genome=genome))
    return pop


def environmental_selection(merged: list[Individual], size: int) -> list[Individual]:
    """(mu+lambda) truncation by (rank, crowding): whole fronts in order, the
    splitting front by descending crowding. A kept solution is never dominated
    by a discarded one, because fronts are filled first-to-last."""
    fronts = _assign_fronts(merged)
    survivors: list[Individual] = []
    for front in fronts:
        if len(survivors) + len(front) <= size:
            survivors.extend(merged[i] for i in front)
        else:
            slots = size - len(survivors)
            by_crowding = sorted(front, key=lambda i: (-merged[i].crowding, i))
            survivors.extend(merged[i] for i in by_crowding[:slots])
            break
    return survivors


@dataclass
class MoHistoryRow:
    iteration: int
    archive_size: int
    best: tuple[float, float, float, float]  # per-objective minima over the archive


def run_nsga2(
    cfg: GAConfig, ctx: EvalContext, pool: Optional[RoutePool] = None
) -> tuple[ParetoArchive, list[MoHistoryRow]]:
    """Elitist (mu+lambda) non-dominated-sorting search; returns the archive
    of all non-dominated genomes encountered plus per-iteration stats."""
    pool = pool or ctx.pool
    rng = random.Random(cfg.seed)
    archive = ParetoArchive()
    history: list[MoHistoryRow] = []

    pop = _initial_population(pool, cfg, rng)
    _evaluate_population(pop, ctx)
    for ind in pop:
        archive.update(ind.genome, ind.objectives)
    _assign_fronts(pop)
    history.append(_mo_row(0, archive))

    for it in range(1, cfg.iterations + 1):
        children = _make_children(pop, _tournament_mo, pool, cfg, rng)
        _evaluate_population(children, ctx)
        for ind in children:
            archive.update(ind.genome, ind.objectives)
        pop = environmental_selection(pop + children, cfg.population_size)
        for ind in pop:
            validate_genome(ind.genome, pool, cfg)
        history.append(_mo_row(it, archive))
    return archive, history


def _mo_row(it: int, archive: ParetoArchive) -> MoHistoryRow:
    vecs = archive.vectors()
    best = tuple(min(v[i] for v in vecs) for i in range(4)) if vecs else (0.0,) * 4
    return MoHistoryRow(iteration=it, archive_size=len(archive), best=best)


@dataclass
class SoHistoryRow:
    iteration: int
    best: float  # best scalar value so far (elitist, non-increasing)
    mean: float  # mean scalar value of the current population


def run_classic_ga(
    cfg: GAConfig,
    scalarizer: Callable[[ObjectiveVector], float],
    ctx: EvalContext,
    pool: Optional[RoutePool] = None,
) -> tuple[Individual, list[SoHistoryRow]]:
    """Classic elitist GA minimizing a scalarized objective; returns the
    best-ever individual and the per-iteration (best, mean) history."""
    pool = pool or ctx.pool
    rng = random.Random(cfg.seed)

    pop = _initial_population(pool, cfg, rng)
    _evaluate_population(pop, ctx)
    for ind in pop:
        ind.fitness = scalarizer(ind.objectives)
    best = min(pop, key=lambda i: i.fitness)
    history = [SoHistoryRow(0, best.fitness, _mean(pop))]

    for it in range(1, cfg.iterations + 1):
        children = _make_children(pop, _tournament_so, pool, cfg, rng)
        _evaluate_population(children, ctx)
        for ind in children:
            ind.fitness = scalarizer(ind.objectives)
        gen_best = min(children, key=lambda i: i.fitness)
        if gen_best.fitness < best.fitness:
            best = gen_best
        # elitist replacement: best-ever survives alongside the offspring
        pop = [best] + sorted(children, key=lambda i: i.fitness)[: cfg.population_size - 1]
        for ind in pop:
            validate_genome(ind.genome, pool, cfg)
        history.append(SoHistoryRow(it, best.fitness, _mean(pop)))
    return best, history


def _mean(pop: list[Individual]) -> float:
    return sum(ind.fitness for ind in pop) / len(pop)
