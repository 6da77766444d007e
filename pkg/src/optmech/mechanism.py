"""Closed-form optimal mechanisms and their full verification.

Given the canonical lattice flow with partially filled node S*, the optimal
interim utility is u(S) = max(cost(S*) - cost(S), 0); allocation marginals
follow as q_i(S) = 1 for i in S and (u(S+{i}) - u(S)) / d_i otherwise, and
the expected price of each type is tau(S) = v(S).q(S) - u(S). When the greedy
flow instead ends exactly on a node's capacity the same formulas still give
an optimal mechanism, but it is flagged as possibly non-unique; with zero
supply every utility weight vanishes and the all-zero-utility mechanism is
returned, likewise flagged.

`verify_bic_ir` replays every truthfulness, rationality and probability
constraint of the full program with exact slacks. Ties are acceptable: a
weakly satisfied constraint is satisfied (deterministic tie-breaking in
favor of the higher-priced entry replaces any rebate scheme).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .core import (
    LP2Params,
    OMDInstance,
    Subset,
    ZERO,
    ONE,
    all_subsets,
    check_subset,
    format_rational,
    from_lp2_params,
    item_range,
    parse_rational,
    subset_label,
    subset_to_list,
    type_prob,
    type_vector,
)
from .errors import InputError, PreconditionError
from .lattice import FlowSolution, node_cost

VERIFY_GUARD = 14  # pairwise truthfulness enumeration is 4^n


@dataclass(frozen=True)
class Mechanism:
    """A direct mechanism over all 2^n types.

    ``u`` maps each type to its truthful expected utility, ``q`` to its
    vector of per-item allocation probabilities, ``tau`` to its expected
    price. ``unique`` records whether the construction certified the
    mechanism as the unique optimum (strictly partial saturation).
    """

    n: int
    u: dict[Subset, Fraction]
    q: dict[Subset, tuple[Fraction, ...]]
    tau: dict[Subset, Fraction]
    unique: bool


def closed_form_mechanism(params: LP2Params, flow: FlowSolution) -> Mechanism:
    """Build the closed-form mechanism from the canonical flow on ``params``.

    Requires B > sum(p_i x_i) so the parameters correspond to an instance.
    """
    if flow.n != params.n:
        raise PreconditionError("flow and parameters disagree on the item count")
    inst, _ = from_lp2_params(params)
    n = params.n
    subsets = all_subsets(n)

    if flow.supply == 0:
        # Degenerate zero-supply case: every utility weight vanishes, any
        # feasible u is optimal; return the all-zero choice, not unique.
        u = {S: ZERO for S in subsets}
        unique = False
    else:
        if flow.partially_filled is not None:
            star = flow.partially_filled
            unique = True
        else:
            star = flow.fill_order[-1]
            unique = False
        cstar = node_cost(params.d, star, n)
        u = {}
        for S in subsets:
            gap = cstar - node_cost(params.d, S, n)
            u[S] = gap if gap > 0 else ZERO

    q = {}
    tau = {}
    for S in subsets:
        marginals = []
        for i in item_range(n):
            if i in S:
                marginals.append(ONE)
            else:
                marginals.append((u[S | {i}] - u[S]) / params.d[i - 1])
        qS = tuple(marginals)
        q[S] = qS
        vec = type_vector(inst, S)
        tau[S] = sum((vi * qi for vi, qi in zip(vec, qS)), ZERO) - u[S]
    return Mechanism(n=n, u=u, q=q, tau=tau, unique=unique)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BicIrReport:
    """Outcome of replaying every direct-mechanism constraint exactly.

    ``violations`` holds (constraint description, exact negative slack).
    """

    n: int
    bic_checked: int
    ir_checked: int
    prob_checked: int
    violations: tuple[tuple[str, Fraction], ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_bic_ir(inst: OMDInstance, mech: Mechanism) -> BicIrReport:
    """Check u(S) >= u(T) + (v(S) - v(T)) . q(T) for every ordered pair,
    u(S) >= 0 and 0 <= q_i(S) <= 1 for every type, with exact slacks."""
    n = inst.n
    if n > VERIFY_GUARD:
        raise PreconditionError(f"n={n} exceeds the verification guard {VERIFY_GUARD}")
    if mech.n != n:
        raise PreconditionError("mechanism and instance disagree on the item count")
    subsets = all_subsets(n)
    vec = {S: type_vector(inst, S) for S in subsets}
    violations = []
    bic = ir = prob = 0
    for S in subsets:
        uS = mech.u[S]
        ir += 1
        if uS < 0:
            violations.append((f"ir({subset_label(S)})", uS))
        for i, qi in enumerate(mech.q[S], start=1):
            prob += 2
            if qi < 0:
                violations.append((f"prob({subset_label(S)},{i},>=0)", qi))
            if qi > 1:
                violations.append((f"prob({subset_label(S)},{i},<=1)", ONE - qi))
        for T in subsets:
            if S == T:
                continue
            bic += 1
            gain = sum(
                ((vec[S][i] - vec[T][i]) * mech.q[T][i] for i in range(n)), ZERO
            )
            slack = uS - mech.u[T] - gain
            if slack < 0:
                violations.append(
                    (f"bic({subset_label(S)}|{subset_label(T)})", slack)
                )
    return BicIrReport(
        n=n,
        bic_checked=bic,
        ir_checked=ir,
        prob_checked=prob,
        violations=tuple(violations),
    )


def is_monotone_supermodular(u: Mapping[Subset, Fraction], n: int) -> bool:
    """True iff u is nondecreasing along lattice edges and satisfies
    u(S+{i}+{j}) - u(S+{j}) >= u(S+{i}) - u(S) for all S, i != j outside S."""
    subsets = all_subsets(n)
    for S in subsets:
        for i in item_range(n):
            if i in S:
                continue
            Si = S | {i}
            if u[Si] < u[S]:
                return False
            for j in item_range(n):
                if j == i or j in S:
                    continue
                Sj = S | {j}
                if u[Si | {j}] - u[Sj] < u[Si] - u[S]:
                    return False
    return True


def expected_revenue(inst: OMDInstance, mech: Mechanism) -> Fraction:
    """sum_S p(S) * tau(S)."""
    return sum((type_prob(inst, S) * mech.tau[S] for S in all_subsets(inst.n)), ZERO)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def bernoulli(rng: random.Random, prob: Fraction) -> bool:
    """Exact Bernoulli(prob) draw: compare a uniform dyadic rational, refined
    one random bit at a time, against the rational threshold."""
    if prob <= 0:
        return False
    if prob >= 1:
        return True
    num = prob.numerator
    den = prob.denominator
    drawn = 0
    scale = 1
    while True:
        drawn = (drawn << 1) | rng.getrandbits(1)
        scale <<= 1
        # the uniform draw lies in [drawn/scale, (drawn+1)/scale)
        if (drawn + 1) * den <= num * scale:
            return True
        if drawn * den >= num * scale:
            return False


def sample_allocation(
    mech: Mechanism, S: Subset, rng: random.Random
) -> tuple[Subset, Fraction]:
    """Draw one allocation for reported type S: item i is included
    independently with probability q_i(S); the price is the deterministic
    tau(S)."""
    S = check_subset(S, mech.n)
    qS = mech.q[S]
    allocated = frozenset(
        i for i in item_range(mech.n) if bernoulli(rng, qS[i - 1])
    )
    return allocated, mech.tau[S]


# ---------------------------------------------------------------------------
# Mechanism JSON document
# ---------------------------------------------------------------------------

def mechanism_to_json_dict(mech: Mechanism) -> dict:
    menu = []
    for S in all_subsets(mech.n):
        menu.append(
            {
                "type": subset_to_list(S),
                "u": format_rational(mech.u[S]),
                "q": [format_rational(v) for v in mech.q[S]],
                "price": format_rational(mech.tau[S]),
            }
        )
    return {"n": mech.n, "menu": menu}


def mechanism_from_json_dict(doc) -> Mechanism:
    """Parse the menu document. The uniqueness flag is not part of the wire
    format, so a loaded mechanism carries unique=False."""
    if not isinstance(doc, dict):
        raise InputError("mechanism document: expected a JSON object")
    n = doc.get("n")
    if not isinstance(n, int) or isinstance(n, bool):
        raise InputError(f"n: expected an integer, got {n!r}")
    menu = doc.get("menu")
    if not isinstance(menu, list):
        raise InputError("menu: missing or not a list")
    if len(menu) != 1 << n:
        raise InputError(f"menu: expected {1 << n} entries, got {len(menu)}")
    u: dict[Subset, Fraction] = {}
    q: dict[Subset, tuple[Fraction, ...]] = {}
    tau: dict[Subset, Fraction] = {}
    for idx, entry in enumerate(menu):
        if not isinstance(entry, dict):
            raise InputError(f"menu[{idx}]: expected an object")
        if "type" not in entry:
            raise InputError(f"menu[{idx}].type: missing field")
        S = check_subset(entry["type"], n, field=f"menu[{idx}].type")
        if S in u:
            raise InputError(f"menu[{idx}].type: duplicate type {subset_to_list(S)}")
        u[S] = parse_rational(entry.get("u"), field=f"menu[{idx}].u")
        raw_q = entry.get("q")
        if not isinstance(raw_q, list) or len(raw_q) != n:
            raise InputError(f"menu[{idx}].q: expected {n} rationals")
        q[S] = tuple(
            parse_rational(v, field=f"menu[{idx}].q[{k}]") for k, v in enumerate(raw_q)
        )
        tau[S] = parse_rational(entry.get("price"), field=f"menu[{idx}].price")
    return Mechanism(n=n, u=u, q=q, tau=tau, unique=False)
