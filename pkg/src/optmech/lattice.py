"""Min-cost flow on the subset lattice and its greedy canonical solution.

Nodes are subsets of {1..n}; flow moves down covering edges S -> S-{i} at
unit cost d_i, so every monotone path from the full set N to a node S costs
cost(S) = sum of d_i over the items missing from S. With N the only supply
node, the cheapest way to absorb its surplus is to saturate sink nodes in
nondecreasing cost order; ties are broken by the package-wide lexicographic
order (smaller binary mask first). The most expensive node left strictly
under capacity is the partially filled node that the closed-form mechanism
is built from.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .core import (
    LP2Params,
    Subset,
    ZERO,
    all_subsets,
    check_subset,
    format_rational,
    item_range,
    subset_label,
    subset_mask,
    subset_prob,
)
from .errors import PreconditionError


def node_cost(d: Sequence[Fraction], S: Subset, m: int) -> Fraction:
    """Cost of lattice node S over ground set {1..m}: sum of d_i for i not in S."""
    S = check_subset(S, m)
    return sum((d[i - 1] for i in item_range(m) if i not in S), ZERO)


def node_balance(params: LP2Params, S: Subset) -> Fraction:
    """Net supply of node S: p(S) * (sum_{i in S} x_i - B).

    Positive values are sources; a negative value's magnitude is the node's
    sink capacity.
    """
    S = check_subset(S, params.n)
    weight = sum((params.x[i - 1] for i in S), ZERO) - params.B
    return subset_prob(params.p, S) * weight


def check_single_positive(params: LP2Params) -> bool:
    """True iff the full set is the unique non-negative-balance node:
    sum(x) >= B and every proper subset sums strictly below B."""
    total = sum(params.x, ZERO)
    if total < params.B:
        return False
    # x_i > 0, so the heaviest proper subset drops only the lightest item.
    return total - min(params.x) < params.B


@dataclass(frozen=True)
class FlowSolution:
    """The canonical greedy flow.

    ``flows`` maps covering edges (src, dst) to the amount carried;
    ``absorbed`` maps each sink node to the amount it received, and
    ``fill_order`` lists those nodes in the order they were filled.
    ``partially_filled`` is the last filled node when it ended strictly
    below capacity; if instead it landed exactly on capacity,
    ``exactly_saturated_boundary`` is set and ``partially_filled`` is None.
    """

    n: int
    supply: Fraction
    flows: dict[tuple[Subset, Subset], Fraction]
    absorbed: dict[Subset, Fraction]
    fill_order: tuple[Subset, ...]
    partially_filled: Subset | None
    exactly_saturated_boundary: bool
    total_cost: Fraction


def canonical_solution(params: LP2Params) -> FlowSolution:
    """Greedily saturate sink nodes in (cost, lex) order until the supply of
    the full set is absorbed.

    Requires the single-positive-node property and feasibility
    sum(p_i x_i) <= B. Each node's intake is routed along the monotone path
    that removes missing items in increasing index order; any other monotone
    path costs the same, so the total cost is path-independent.
    """
    n = params.n
    full = frozenset(item_range(n))
    total = sum(params.x, ZERO)
    if not check_single_positive(params):
        if total < params.B:
            raise PreconditionError(
                f"node {subset_label(full)} is not positive: "
                f"sum(x) = {format_rational(total)} < B = {format_rational(params.B)}"
            )
        lightest = min(item_range(n), key=lambda i: (params.x[i - 1], i))
        witness = full - {lightest}
        raise PreconditionError(
            f"multiple positive nodes: proper subset {subset_label(witness)} "
            f"sums to {format_rational(total - params.x[lightest - 1])} >= B = "
            f"{format_rational(params.B)}"
        )
    expected = sum((pi * xi for pi, xi in zip(params.p, params.x)), ZERO)
    if expected > params.B:
        raise PreconditionError(
            f"infeasible parameters: sum(p_i x_i) = {format_rational(expected)} "
            f"> B = {format_rational(params.B)}"
        )

    supply = subset_prob(params.p, full) * (total - params.B)
    costs = {S: node_cost(params.d, S, n) for S in all_subsets(n)}
    sinks = sorted(
        (S for S in all_subsets(n) if S != full),
        key=lambda S: (costs[S], subset_mask(S)),
    )

    flows: dict[tuple[Subset, Subset], Fraction] = {}
    absorbed: dict[Subset, Fraction] = {}
    fill_order: list[Subset] = []
    partially_filled: Subset | None = None
    boundary = False
    total_cost = ZERO
    remaining = supply
    for S in sinks:
        if remaining == 0:
            break
        capacity = -node_balance(params, S)
        take = capacity if capacity <= remaining else remaining
        if take == 0:
            continue
        absorbed[S] = take
        fill_order.append(S)
        total_cost += take * costs[S]
        node = full
        for i in sorted(full - S):
            child = node - {i}
            edge = (node, child)
            flows[edge] = flows.get(edge, ZERO) + take
            node = child
        remaining -= take
        if remaining == 0:
            if take < capacity:
                partially_filled = S
            else:
                boundary = True
            break
    if remaining != 0:
        raise PreconditionError("sink capacity exhausted before the supply was absorbed")

    return FlowSolution(
        n=n,
        supply=supply,
        flows=flows,
        absorbed=absorbed,
        fill_order=tuple(fill_order),
        partially_filled=partially_filled,
        exactly_saturated_boundary=boundary,
        total_cost=total_cost,
    )


def dump_lattice(params: LP2Params, flow: FlowSolution) -> str:
    """Audit dump: one line per node in (cost, lex) order with its subset,
    cost, balance and absorbed flow, all exact."""
    n = params.n
    lines = [f"n={n} supply={format_rational(flow.supply)} "
             f"total_cost={format_rational(flow.total_cost)}"]
    nodes = sorted(
        all_subsets(n),
        key=lambda S: (node_cost(params.d, S, n), subset_mask(S)),
    )
    for S in nodes:
        lines.append(
            f"node={subset_label(S)} "
            f"cost={format_rational(node_cost(params.d, S, n))} "
            f"balance={format_rational(node_balance(params, S))} "
            f"absorbed={format_rational(flow.absorbed.get(S, ZERO))}"
        )
    return "\n".join(lines) + "\n"
