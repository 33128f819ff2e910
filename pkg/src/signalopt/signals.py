"""Signal plans, green splits, chromosome decoding and feasibility repair.

All values are immutable and the operations are pure functions, so plans
can be shared freely across concurrent fitness evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass

from .netmodel import Link, Movement, Network

__all__ = [
    "MIN_GREEN_S",
    "PlanError",
    "InfeasibleLayoutError",
    "Phase",
    "SignalPlan",
    "PhaseSplits",
    "JunctionLayout",
    "SignalLayout",
    "phase_splits",
    "link_green_split",
    "link_green_splits",
    "decode_chromosome",
    "encode_plans",
    "repair",
    "display_durations",
]

# Shortest admissible phase duration.  Enforced by the search operators so
# every candidate plan stays drivable.
MIN_GREEN_S = 3.0

# Tolerance for cycle-sum checks on decoded or hand-built plans.
SUM_TOL = 1e-6


class PlanError(ValueError):
    """A signal plan or chromosome violates its invariants."""


class InfeasibleLayoutError(PlanError):
    """The cycle cannot accommodate the minimum green of every phase."""


@dataclass(frozen=True)
class Phase:
    duration: float  # seconds
    green_movements: tuple  # tuple of Movement


@dataclass(frozen=True)
class SignalPlan:
    """Fixed-order phase timings for one junction.

    Durations are real-valued; use :func:`display_durations` for rounded
    presentation.  Sum-to-cycle validation happens in the operations that
    consume plans, so invalid candidates can be constructed for testing.
    """

    junction: object
    cycle: float
    phases: tuple  # tuple of Phase

    @property
    def durations(self):
        return tuple(p.duration for p in self.phases)


@dataclass(frozen=True)
class PhaseSplits:
    """Per-phase fraction of the cycle; sums to one (no lost time)."""

    splits: tuple


@dataclass(frozen=True)
class JunctionLayout:
    junction: object
    cycle: float
    phase_movements: tuple  # tuple of tuples of Movement
    initial_durations: tuple
    min_green: float = MIN_GREEN_S

    @property
    def phase_count(self) -> int:
        return len(self.phase_movements)


@dataclass(frozen=True)
class SignalLayout:
    """Gene layout: junction order, phase counts and movement sets."""

    junctions: tuple  # tuple of JunctionLayout

    @classmethod
    def from_network(cls, net: Network, min_green: float = MIN_GREEN_S) -> "SignalLayout":
        junctions = []
        for table in net.signals:
            phase_movements = tuple(
                tuple(net.movements[i] for i in phase) for phase in table.phases
            )
            initial = table.initial_durations or tuple(
                table.cycle / len(table.phases) for _ in table.phases
            )
            junctions.append(
                JunctionLayout(table.junction, table.cycle, phase_movements, tuple(initial), min_green)
            )
        if not junctions:
            raise PlanError("network has no signal layout")
        return cls(tuple(junctions))

    @property
    def gene_count(self) -> int:
        return sum(j.phase_count for j in self.junctions)

    def segments(self):
        """(start, end, junction layout) slices of the flat gene vector."""
        out, start = [], 0
        for j in self.junctions:
            out.append((start, start + j.phase_count, j))
            start += j.phase_count
        return out

    def initial_genes(self):
        genes = []
        for j in self.junctions:
            genes.extend(j.initial_durations)
        return tuple(genes)


def snap_sum(values, target):
    """Nudge one element so the plain sum equals ``target`` exactly.

    Corrections are float rounding noise, never a visible timing change.
    They are absorbed by the largest element first (most headroom above the
    minimum green); if re-rounding refuses to land there, the remaining
    elements are tried in turn.
    """
    out = list(values)
    if sum(out) == target:
        return out
    for k in sorted(range(len(out)), key=lambda i: (-out[i], i)):
        for _ in range(6):
            residual = sum(out) - target
            if residual == 0.0:
                return out
            out[k] -= residual
    if sum(out) != target:
        raise PlanError(f"could not normalize durations to cycle {target}")
    return out


def phase_splits(plan: SignalPlan) -> PhaseSplits:
    """Fraction of the cycle given to each phase; fractions sum to one."""
    durations = plan.durations
    if not durations:
        raise PlanError(f"plan for {plan.junction!r} has no phases")
    if any(d <= 0 for d in durations):
        raise PlanError(f"plan for {plan.junction!r} has a non-positive duration")
    if abs(sum(durations) - plan.cycle) > SUM_TOL:
        raise PlanError(
            f"plan for {plan.junction!r}: durations sum to {sum(durations)}, "
            f"cycle is {plan.cycle}"
        )
    return PhaseSplits(tuple(d / plan.cycle for d in durations))


def link_green_split(plans, link: Link) -> float:
    """Share of the cycle during which traffic may leave ``link``.

    Sums the splits of every phase that grants green to at least one
    movement departing the link.  Links that are not signal controlled get
    the full hour (1.0).
    """
    if not link.signal_controlled:
        return 1.0
    plan = next((p for p in plans if p.junction == link.to_node), None)
    if plan is None:
        raise PlanError(f"no signal plan for junction {link.to_node!r}")
    splits = phase_splits(plan).splits
    lam = 0.0
    for split, phase in zip(splits, plan.phases):
        if any(m.in_link == link.id for m in phase.green_movements):
            lam += split
    if lam == 0.0:
        raise PlanError(f"link {link.id!r} is signal controlled but green in no phase")
    return min(lam, 1.0)


def link_green_splits(net: Network, plans) -> dict:
    """Green split for every link of the network, keyed by link id."""
    return {lid: link_green_split(plans, link) for lid, link in net.links.items()}


def decode_chromosome(genes, layout: SignalLayout):
    """Turn a flat duration vector into one plan per junction.

    Durations are copied verbatim; each junction segment must sum to that
    junction's cycle within 1e-6 seconds.
    """
    genes = tuple(getattr(genes, "genes", genes))
    if len(genes) != layout.gene_count:
        raise PlanError(
            f"chromosome has {len(genes)} genes, layout expects {layout.gene_count}"
        )
    plans = []
    for start, end, j in layout.segments():
        segment = genes[start:end]
        if abs(sum(segment) - j.cycle) > SUM_TOL:
            raise PlanError(
                f"junction {j.junction!r}: segment sums to {sum(segment)}, cycle is {j.cycle}"
            )
        phases = tuple(
            Phase(duration, movements)
            for duration, movements in zip(segment, j.phase_movements)
        )
        plans.append(SignalPlan(j.junction, j.cycle, phases))
    return plans


def encode_plans(plans, layout: SignalLayout):
    """Inverse of :func:`decode_chromosome`; round-trips exactly."""
    by_junction = {p.junction: p for p in plans}
    genes = []
    for j in layout.junctions:
        plan = by_junction.get(j.junction)
        if plan is None:
            raise PlanError(f"missing plan for junction {j.junction!r}")
        if len(plan.phases) != j.phase_count:
            raise PlanError(f"junction {j.junction!r}: phase count mismatch")
        genes.extend(plan.durations)
    return tuple(genes)


def repair(durations, cycle: float, min_green: float = MIN_GREEN_S):
    """Project durations onto the feasible set {d >= min_green, sum = cycle}.

    Already-feasible input is returned unchanged.  Otherwise durations are
    clamped to the minimum green and the remaining budget above the minimum
    is redistributed proportionally to each phase's clamped surplus.
    """
    durations = tuple(durations)
    n = len(durations)
    if n == 0:
        raise InfeasibleLayoutError("cannot repair an empty duration vector")
    budget = cycle - n * min_green
    if budget < 0:
        raise InfeasibleLayoutError(
            f"cycle {cycle} cannot fit {n} phases of at least {min_green} s"
        )
    if all(d >= min_green for d in durations) and sum(durations) == cycle:
        return durations
    surplus = [max(d, min_green) - min_green for d in durations]
    total = sum(surplus)
    if total == 0.0:
        out = [min_green + budget / n] * n
    else:
        out = [min_green + s * budget / total for s in surplus]
    return tuple(snap_sum(out, cycle))


def display_durations(plan: SignalPlan):
    """Integer-second durations for display, largest-remainder rounded.

    The optimizer itself works on real-valued durations; rounding here
    preserves the cycle total exactly.
    """
    floors = [int(d) for d in plan.durations]
    remainders = [d - f for d, f in zip(plan.durations, floors)]
    missing = round(plan.cycle) - sum(floors)
    order = sorted(range(len(floors)), key=lambda i: (-remainders[i], i))
    for i in order[:missing]:
        floors[i] += 1
    return floors
