"""Genetic search over phase durations.

Chromosomes are flat vectors of phase durations, junction by junction.
Selection is a two-way tournament, crossover blends parents with a uniform
inheritance weight, and mutation moves green time between two phases of one
junction, so every operator preserves each junction's cycle total exactly.

All random draws happen on the control thread in a fixed, documented order
(tournament picks, crossover gate and weights, mutation gate and picks), so
a seed fully determines the run no matter how fitness evaluations are
parallelized.
"""

from __future__ import annotations

import os
import random
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .assignment import CostParams, SolverOptions, solve_ue
from .signals import (
    InfeasibleLayoutError,
    SignalLayout,
    decode_chromosome,
    link_green_splits,
    repair,
    snap_sum,
)

__all__ = [
    "Chromosome",
    "GAConfig",
    "GAResult",
    "GenerationRecord",
    "IndividualRecord",
    "FitnessEvaluator",
    "init_population",
    "fitness",
    "tournament",
    "crossover",
    "crossover_blend",
    "mutate",
    "mutate_apply",
    "run_ga",
    "evaluation_threads",
]


@dataclass(frozen=True)
class Chromosome:
    """Flat sequence of phase durations across all signalized junctions."""

    genes: tuple

    def __len__(self):
        return len(self.genes)


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 75
    max_generations: int = 20
    p_crossover: float = 0.8
    p_mutation: float = 0.1
    elitism: int = 1
    seed: int = 42

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        for name in ("p_crossover", "p_mutation"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if not 0 <= self.elitism < self.population_size:
            raise ValueError("elitism must be in [0, population_size)")


@dataclass(frozen=True)
class IndividualRecord:
    genes: tuple
    fitness: float  # negative vehicle-hours
    converged: bool


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    individuals: tuple  # tuple of IndividualRecord
    best_fitness_so_far: float
    best_genes_so_far: tuple


@dataclass(frozen=True)
class GAResult:
    best_chromosome: Chromosome
    best_fitness: float
    trace: tuple  # tuple of GenerationRecord
    evaluations: int  # actual solver runs
    memo_hits: int


def evaluation_threads() -> int:
    """Worker count for fitness evaluation, capped by SIGNALOPT_THREADS."""
    raw = os.environ.get("SIGNALOPT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


class FitnessEvaluator:
    """Memoized fitness: decode, derive green splits, solve, negate.

    Fitness values are memoized on genes rounded to 1e-6 s; tournament reuse
    and elitism make duplicate evaluations common and the equilibrium solve
    dominates runtime.  Evaluation is pure, so a thread pool may compute
    individuals concurrently; results are merged by index and never depend
    on scheduling.
    """

    def __init__(self, net, layout: SignalLayout, params: CostParams = CostParams(), opts: SolverOptions = SolverOptions()):
        self.net = net
        self.layout = layout
        self.params = params
        self.opts = opts
        self._memo = {}
        self._lock = threading.Lock()
        self.evaluations = 0
        self.memo_hits = 0

    def _key(self, genes):
        return tuple(round(g, 6) for g in genes)

    def evaluate(self, chromosome) -> IndividualRecord:
        genes = tuple(getattr(chromosome, "genes", chromosome))
        key = self._key(genes)
        with self._lock:
            hit = self._memo.get(key)
            if hit is not None:
                self.memo_hits += 1
                return IndividualRecord(genes, hit[0], hit[1])
        plans = decode_chromosome(genes, self.layout)
        splits = link_green_splits(self.net, plans)
        result = solve_ue(self.net, splits, self.opts, self.params)
        value = -result.total_travel_time
        with self._lock:
            self._memo.setdefault(key, (value, result.converged))
            self.evaluations += 1
        return IndividualRecord(genes, value, result.converged)

    def evaluate_population(self, population):
        threads = evaluation_threads()
        if threads == 1 or len(population) <= 1:
            return [self.evaluate(c) for c in population]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(self.evaluate, population))


def fitness(chromosome, net, layout: SignalLayout, params: CostParams = CostParams(), opts: SolverOptions = SolverOptions()) -> float:
    """Negated total travel time (vehicle-hours) of the decoded plan."""
    return FitnessEvaluator(net, layout, params, opts).evaluate(chromosome).fitness


def _sample_segment(junction, rng) -> list:
    """Uniform draw from {d_k >= min_green, sum = cycle} via sorted spacings."""
    k = junction.phase_count
    budget = junction.cycle - k * junction.min_green
    if budget < 0:
        raise InfeasibleLayoutError(
            f"junction {junction.junction!r}: cycle {junction.cycle} cannot fit "
            f"{k} phases of {junction.min_green} s"
        )
    cuts = sorted(rng.random() for _ in range(k - 1))
    bounds = [0.0] + cuts + [1.0]
    segment = [junction.min_green + (b - a) * budget for a, b in zip(bounds, bounds[1:])]
    return snap_sum(segment, junction.cycle)


def init_population(layout: SignalLayout, cfg: GAConfig, rng: random.Random):
    """Random feasible population; one simplex draw per junction segment."""
    population = []
    for _ in range(cfg.population_size):
        genes = []
        for junction in layout.junctions:
            genes.extend(_sample_segment(junction, rng))
        population.append(Chromosome(tuple(genes)))
    return population


def tournament(population, fitnesses, rng: random.Random):
    """Two-way tournament: draw two distinct indices, keep the fitter.

    Ties go to the first drawn.  Draws are with replacement across calls.
    """
    n = len(population)
    if n == 0:
        raise ValueError("tournament over an empty population")
    if n == 1:
        return population[0]
    i = rng.randrange(n)
    j = rng.randrange(n - 1)
    if j >= i:
        j += 1
    return population[i] if fitnesses[i] >= fitnesses[j] else population[j]


def crossover_blend(father, mother, x1: float, x2: float, layout: SignalLayout):
    """Blend children: child = x * father + (1 - x) * mother, one x per child.

    Linearity keeps each junction segment on the parents' shared cycle;
    sums are snapped against float drift and the minimum green re-imposed
    if rounding nicked it.
    """
    fg = tuple(getattr(father, "genes", father))
    mg = tuple(getattr(mother, "genes", mother))
    if len(fg) != len(mg) or len(fg) != layout.gene_count:
        raise ValueError("parents do not share the layout")
    children = []
    for x in (x1, x2):
        genes = [x * f + (1.0 - x) * m for f, m in zip(fg, mg)]
        fixed = []
        for start, end, junction in layout.segments():
            segment = snap_sum(genes[start:end], junction.cycle)
            if any(d < junction.min_green for d in segment):
                segment = repair(segment, junction.cycle, junction.min_green)
            fixed.extend(segment)
        children.append(Chromosome(tuple(fixed)))
    return children[0], children[1]


def crossover(father, mother, cfg: GAConfig, rng: random.Random, layout: SignalLayout):
    """With probability p_crossover blend the parents, otherwise copy them."""
    if rng.random() < cfg.p_crossover:
        x1 = rng.random()
        x2 = rng.random()
        return crossover_blend(father, mother, x1, x2, layout)
    return (
        Chromosome(tuple(getattr(father, "genes", father))),
        Chromosome(tuple(getattr(mother, "genes", mother))),
    )


def mutate_apply(child, junction_index: int, v: int, w: int, var: float, layout: SignalLayout):
    """Move ``var`` seconds of green from phase ``v`` to phase ``w``.

    Phases are indices within the chosen junction; exactly those two genes
    change and the junction total is preserved.
    """
    genes = list(getattr(child, "genes", child))
    start, end, junction = layout.segments()[junction_index]
    if not 0 <= v < junction.phase_count or not 0 <= w < junction.phase_count or v == w:
        raise ValueError("mutation phases must be distinct and in range")
    if var < 0 or var > genes[start + v] - junction.min_green:
        raise ValueError("mutation variation exceeds the donor phase's headroom")
    if var == 0.0:
        return Chromosome(tuple(genes))
    genes[start + v] -= var
    genes[start + w] += var
    segment = snap_sum(genes[start:end], junction.cycle)
    genes[start:end] = segment
    return Chromosome(tuple(genes))


def mutate(child, cfg: GAConfig, rng: random.Random, layout: SignalLayout):
    """With probability p_mutation shift green between two phases of one junction."""
    if rng.random() >= cfg.p_mutation:
        return child if isinstance(child, Chromosome) else Chromosome(tuple(child))
    junction_index = rng.randrange(len(layout.junctions))
    _, _, junction = layout.segments()[junction_index]
    k = junction.phase_count
    v = rng.randrange(k)
    w = rng.randrange(k - 1)
    if w >= v:
        w += 1
    genes = tuple(getattr(child, "genes", child))
    start = layout.segments()[junction_index][0]
    headroom = genes[start + v] - junction.min_green
    var = rng.uniform(0.0, headroom) if headroom > 0 else 0.0
    return mutate_apply(child, junction_index, v, w, var, layout)


def run_ga(
    net,
    layout: SignalLayout,
    cfg: GAConfig,
    params: CostParams = CostParams(),
    opts: SolverOptions = SolverOptions(),
    seed_individuals=(),
) -> GAResult:
    """Full generational loop; returns the best plan found and a full trace.

    ``seed_individuals`` replace the head of the initial random population
    (they do not consume random draws), which lets a caller warm-start the
    search from a known plan.  With any elitism the best-so-far fitness is
    non-decreasing across generations.
    """
    rng = random.Random(cfg.seed)
    evaluator = FitnessEvaluator(net, layout, params, opts)

    population = init_population(layout, cfg, rng)
    for slot, seeded in enumerate(seed_individuals):
        if slot >= len(population):
            break
        genes = tuple(getattr(seeded, "genes", seeded))
        if len(genes) != layout.gene_count:
            raise ValueError("seed individual does not match the layout")
        population[slot] = Chromosome(genes)

    records = evaluator.evaluate_population(population)
    best = max(records, key=lambda r: r.fitness)
    trace = [GenerationRecord(0, tuple(records), best.fitness, best.genes)]

    for generation in range(1, cfg.max_generations + 1):
        fitnesses = [r.fitness for r in records]
        order = sorted(range(len(records)), key=lambda i: (-fitnesses[i], i))
        elites = [population[i] for i in order[: cfg.elitism]]

        children = []
        need = cfg.population_size - cfg.elitism
        while len(children) < need:
            father = tournament(population, fitnesses, rng)
            mother = tournament(population, fitnesses, rng)
            c1, c2 = crossover(father, mother, cfg, rng, layout)
            children.append(mutate(c1, cfg, rng, layout))
            if len(children) < need:
                children.append(mutate(c2, cfg, rng, layout))

        population = elites + children
        records = evaluator.evaluate_population(population)
        gen_best = max(records, key=lambda r: r.fitness)
        if gen_best.fitness > best.fitness:
            best = gen_best
        trace.append(GenerationRecord(generation, tuple(records), best.fitness, best.genes))

    return GAResult(
        best_chromosome=Chromosome(best.genes),
        best_fitness=best.fitness,
        trace=tuple(trace),
        evaluations=evaluator.evaluations,
        memo_hits=evaluator.memo_hits,
    )
