"""The counting-hardness reduction chain, instantiated and checkable.

Three layers, each exact:

  * subset-sum counting -> rank queries: the gadget embeds a counting
    instance into a family of integer collections whose special set's rank
    reveals the per-cardinality counts via a unit-triangular inversion;
  * rank queries -> mechanism instances: an integer collection is encoded
    into lattice costs (scaled by 2^(n+1), with 2^i tie-break terms) so that
    the k-th cheapest node at the relevant level corresponds to the k-th
    ranked same-size subset, and a probability parameter is isolated by exact
    bisection so that precisely that node ends up partially filled;
  * decision extraction: the probe type's allocation probability for the
    distinguished item is exactly 0 or 1 and answers the rank query.

All searches and evaluations are exact rational arithmetic; the bisection
returns a dyadic rational and re-verifies its target window with `eval_f`
before returning, so no step depends on an unverified numeric bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import comb
from typing import Sequence

from .core import (
    LP2Params,
    OMDInstance,
    Subset,
    ZERO,
    ONE,
    check_subset,
    format_rational,
    from_lp2_params,
    item_range,
    subset_label,
    subset_mask,
)
from .errors import InputError, PreconditionError, VerificationError
from .lattice import canonical_solution, node_cost
from .mechanism import Mechanism, closed_form_mechanism

LEXRANK_GUARD = 22    # rank oracle enumerates binom(n, |S|) subsets
SUBSETSUM_GUARD = 10  # staged inversion runs n rank evaluations on up to 2n items


# ---------------------------------------------------------------------------
# Rank semantics
# ---------------------------------------------------------------------------

def lex_leq(S1: Subset, S2: Subset) -> bool:
    """Total preorder on subsets: S1 <= S2 iff the largest element of the
    symmetric difference lies in S2 (always true when S1 == S2)."""
    diff = S1 ^ S2
    if not diff:
        return True
    return max(diff) in S2


def _check_collection(C: Sequence[int], field: str = "C") -> tuple[int, ...]:
    out = tuple(C)
    if not out:
        raise InputError(f"{field}: must be nonempty")
    for i, c in enumerate(out, start=1):
        if not isinstance(c, int) or isinstance(c, bool) or c <= 0:
            raise InputError(f"{field}: entry {i} must be a positive integer, got {c!r}")
    return out


def lexrank_oracle(C: Sequence[int], S: Subset) -> int:
    """Rank of S among same-cardinality subsets of {1..len(C)}, ordered by
    subset sum with lexicographic tie-breaking; counts S itself, so >= 1.

    Brute-force enumeration; guarded at |C| <= 22.
    """
    C = _check_collection(C)
    n = len(C)
    if n > LEXRANK_GUARD:
        raise PreconditionError(f"|C|={n} exceeds the enumeration guard {LEXRANK_GUARD}")
    S = check_subset(S, n, field="S")
    size = len(S)
    target_sum = sum(C[i - 1] for i in S)
    target_mask = subset_mask(S)
    rank = 0
    for other in _size_subsets(n, size):
        total = sum(C[i - 1] for i in other)
        if total < target_sum:
            rank += 1
        elif total == target_sum and subset_mask(other) <= target_mask:
            rank += 1
    return rank


def _size_subsets(n: int, size: int):
    for combo in combinations(item_range(n), size):
        yield frozenset(combo)


# ---------------------------------------------------------------------------
# Subset-sum counting via rank queries
# ---------------------------------------------------------------------------

def _check_weights(W: Sequence[int]) -> tuple[int, ...]:
    return _check_collection(W, field="W")


def subsetsum_gadget(W: Sequence[int], T: int, ell: int) -> tuple[tuple[int, ...], Subset]:
    """Stage-ell collection and its special set.

    Entries: 4n*w_i for the original weights, 4n*T + 2n for the pivot
    element n+1, and ell-1 trailing ones; the special set is the pivot plus
    all trailing ones, so its sum is 4n*T + 2n + ell - 1.
    """
    W = _check_weights(W)
    n = len(W)
    if not isinstance(T, int) or isinstance(T, bool) or T < 0:
        raise InputError(f"T: expected a nonnegative integer, got {T!r}")
    if not 1 <= ell <= n:
        raise PreconditionError(f"ell must lie in 1..{n}, got {ell}")
    C = [4 * n * w for w in W]
    C.append(4 * n * T + 2 * n)
    C.extend([1] * (ell - 1))
    special = frozenset(range(n + 1, n + ell + 1))
    return tuple(C), special


def count_subsets_of_size(W: Sequence[int], T: int, size: int) -> int:
    """Number of size-``size`` subsets of {1..n} with weight sum <= T
    (direct enumeration)."""
    W = _check_weights(W)
    n = len(W)
    return sum(
        1
        for S in _size_subsets(n, size)
        if sum(W[i - 1] for i in S) <= T
    )


def count_subsetsum(W: Sequence[int], T: int) -> int:
    """Number of subsets (including the empty set) with sum <= T.

    Computed two ways -- direct enumeration, and the staged gadget inversion
    that recovers each per-cardinality count from one rank query -- which
    must agree exactly.
    """
    W = _check_weights(W)
    n = len(W)
    if not isinstance(T, int) or isinstance(T, bool) or T < 0:
        raise InputError(f"T: expected a nonnegative integer, got {T!r}")
    if n > SUBSETSUM_GUARD:
        raise PreconditionError(
            f"|W|={n} exceeds the staged-inversion guard {SUBSETSUM_GUARD}"
        )

    direct = sum(
        1
        for mask in range(1 << n)
        if sum(W[i] for i in range(n) if mask >> i & 1) <= T
    )

    # Stage ell reveals count(T, ell) once counts for smaller sizes are known:
    # rank(stage ell) = 1 + sum_{m<=ell} count(T, m) * binom(ell-1, ell-m).
    counts: dict[int, int] = {}
    for ell in range(1, n + 1):
        C_ell, S_ell = subsetsum_gadget(W, T, ell)
        rank = lexrank_oracle(C_ell, S_ell)
        acc = rank - 1
        for m in range(1, ell):
            acc -= counts[m] * comb(ell - 1, ell - m)
        counts[ell] = acc
    staged = 1 + sum(counts.values())

    if staged != direct:
        raise VerificationError(
            f"staged inversion gives {staged}, direct enumeration gives {direct}"
        )
    return direct


# ---------------------------------------------------------------------------
# Parameter search
# ---------------------------------------------------------------------------

def eval_f(n: int, s: int, p: Fraction) -> Fraction:
    """Exact value of the saturation ratio at probability p: surplus left
    over once all lattice levels above the target one are saturated, divided
    by the combined capacity of one node pair at the target level."""
    if not isinstance(p, Fraction):
        p = Fraction(p)
    if not ZERO < p < ONE:
        raise PreconditionError(f"p must lie in (0,1), got {format_rational(p)}")
    if not 1 <= s <= n - 1:
        raise PreconditionError(f"s must lie in 1..{n - 1}, got {s}")
    q = ONE - p
    numerator = ZERO
    for i in range(n - s + 1, n + 1):
        numerator += comb(n, i) * p**i * q ** (n - i) * (2 * (i + p - n) - 1)
    denominator = p ** (n - s) * q**s * (2 * s - 2 * p + 1)
    return numerator / denominator


def _dyadic_between(lo: Fraction, hi: Fraction) -> Fraction:
    """A dyadic rational strictly inside (lo, hi), near the midpoint."""
    width = hi - lo
    t = width.denominator.bit_length() - width.numerator.bit_length() + 3
    if t < 1:
        t = 1
    while (width.numerator << t) < 4 * width.denominator:
        t += 1
    center2 = lo + hi  # midpoint * 2
    m = (center2.numerator << (t - 1)) // center2.denominator
    cand = Fraction(m, 1 << t)
    if not lo < cand < hi:  # cannot happen with 2^t * width >= 4
        raise VerificationError("dyadic midpoint fell outside the bracket")
    return cand


@lru_cache(maxsize=None)
def _find_parameter(n: int, s: int, k: int) -> Fraction:
    target = Fraction(k) - Fraction(1, 4 * n + 4)
    window_lo = Fraction(k) - Fraction(1, 2 * n + 2)
    window_hi = Fraction(k)
    lo = Fraction(1, 2)
    hi = ONE - Fraction(1, 2 * n + 2)
    f_lo = eval_f(n, s, lo)
    if f_lo == target:
        return lo
    if f_lo > target:
        raise VerificationError("left endpoint already exceeds the bisection target")
    # Right endpoint is used for bracketing only and is never returned.
    if eval_f(n, s, hi) < target:
        raise VerificationError("right endpoint does not bracket the target")
    # Bisect until the bracket is provably tight, then insist on an exact
    # window verification; the derivative bound only decides when to start
    # trusting the window, never the answer itself.
    M = (2 * n + 2) ** (2 * n + 1) * (2 * n + 1) * 2 ** (4 * n + 2)
    stop_width = Fraction(1, (4 * n + 4) * M)
    while True:
        mid = _dyadic_between(lo, hi)
        fm = eval_f(n, s, mid)
        if fm == target:
            return mid
        if hi - lo <= stop_width and window_lo < fm < window_hi:
            return mid
        if fm < target:
            lo = mid
        else:
            hi = mid


def find_parameter(n: int, s: int, k: int) -> Fraction:
    """A dyadic probability p in [1/2, 1 - 1/(2n+2)) with
    eval_f(n, s, p) strictly inside (k - 1/(2n+2), k), verified exactly."""
    if not 1 <= s <= n - 1:
        raise PreconditionError(f"s must lie in 1..{n - 1}, got {s}")
    if not 1 <= k <= comb(n, s):
        raise PreconditionError(f"k must lie in 1..C({n},{s})={comb(n, s)}, got {k}")
    return _find_parameter(n, s, int(k))


# ---------------------------------------------------------------------------
# Rank query -> mechanism instance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReductionOutput:
    """Everything the decision extraction needs about a constructed instance."""

    instance: OMDInstance
    params: LP2Params
    probe_type: Subset
    distinguished_item: int
    p_tilde: Fraction
    target_T_star: Subset

    def __post_init__(self):
        n = self.instance.n - 1
        if not Fraction(1, 2) <= self.p_tilde < ONE - Fraction(1, 2 * n + 2):
            raise VerificationError("p_tilde fell outside its admissible interval")


def _reduction_d(C: tuple[int, ...]) -> tuple[Fraction, ...]:
    n = len(C)
    total = sum(C)
    scale = 1 << (n + 1)
    d = [Fraction(scale * (c + total) + (1 << i)) for i, c in enumerate(C, start=1)]
    d.append(ONE)
    return tuple(d)


def _reduction_params(C: tuple[int, ...], p_tilde: Fraction) -> LP2Params:
    n = len(C)
    return LP2Params(
        n=n + 1,
        x=(Fraction(2),) * (n + 1),
        B=Fraction(2 * n + 1),
        d=_reduction_d(C),
        p=(p_tilde,) * (n + 1),
    )


def _validate_rank_query(C, S, k):
    C = _check_collection(C)
    n = len(C)
    S = check_subset(S, n, field="S")
    if len(S) in (0, n):
        raise PreconditionError(
            f"|S| must lie in 1..{n - 1} for the reduction, got |S|={len(S)}"
        )
    if not isinstance(k, int) or isinstance(k, bool):
        raise InputError(f"k: expected an integer, got {k!r}")
    if not 1 <= k <= comb(n, len(S)):
        raise PreconditionError(
            f"k must lie in 1..C({n},{len(S)})={comb(n, len(S))}, got {k}"
        )
    return C, S, k


def lexrank_to_omd(C: Sequence[int], S: Subset, k: int) -> ReductionOutput:
    """Construct the instance whose unique optimal mechanism answers the
    rank query (C, S, k) through the probe type's distinguished item."""
    C, S, k = _validate_rank_query(C, S, k)
    n = len(C)
    p_tilde = find_parameter(n, len(S), k)
    params = _reduction_params(C, p_tilde)
    instance, _ = from_lp2_params(params)
    probe = frozenset(item_range(n)) - S
    d = params.d
    level = sorted(
        _size_subsets(n, n - len(S)),
        key=lambda T: (node_cost(d, T, n + 1), subset_mask(T)),
    )
    return ReductionOutput(
        instance=instance,
        params=params,
        probe_type=probe,
        distinguished_item=n + 1,
        p_tilde=p_tilde,
        target_T_star=level[k - 1],
    )


@lru_cache(maxsize=256)
def _reduction_mechanism(
    C: tuple[int, ...], s: int, k: int
) -> tuple[LP2Params, Subset, Mechanism]:
    """The constructed mechanism depends on (C, |S|, k) only; cached so that
    sweeping all probe sets S of one size reuses a single pipeline run."""
    n = len(C)
    p_tilde = find_parameter(n, s, k)
    params = _reduction_params(C, p_tilde)
    flow = canonical_solution(params)
    if flow.partially_filled is None:
        raise VerificationError(
            "parameter search failed to produce a strictly partially filled node"
        )
    mech = closed_form_mechanism(params, flow)
    return params, flow.partially_filled, mech


def decide_lexrank(C: Sequence[int], S: Subset, k: int) -> bool:
    """End-to-end decision: build the instance, solve it in closed form and
    read the distinguished item's allocation probability for the probe type,
    which must be exactly 0 or 1."""
    C, S, k = _validate_rank_query(C, S, k)
    n = len(C)
    out = lexrank_to_omd(C, S, k)
    _, star, mech = _reduction_mechanism(C, len(S), k)
    if star != out.target_T_star:
        raise VerificationError(
            f"partially filled node {subset_label(star)} is not the targeted "
            f"node {subset_label(out.target_T_star)}"
        )
    probe_q = mech.q[out.probe_type][out.distinguished_item - 1]
    if probe_q == ONE:
        return True
    if probe_q == ZERO:
        return False
    raise VerificationError(
        f"probe allocation probability is {format_rational(probe_q)}, expected 0 or 1"
    )


# ---------------------------------------------------------------------------
# CLI input documents
# ---------------------------------------------------------------------------

def rank_query_from_json_dict(doc) -> tuple[tuple[int, ...], Subset, int]:
    """Parse {"C": [ints], "S": [indices], "k": int}."""
    if not isinstance(doc, dict):
        raise InputError("rank query document: expected a JSON object")
    for field in ("C", "S", "k"):
        if field not in doc:
            raise InputError(f"{field}: missing field")
    C = doc["C"]
    if not isinstance(C, list):
        raise InputError("C: expected a list of positive integers")
    C = _check_collection(C)
    S_raw = doc["S"]
    if not isinstance(S_raw, list):
        raise InputError("S: expected a list of item indices")
    S = check_subset(S_raw, len(C), field="S")
    k = doc["k"]
    if not isinstance(k, int) or isinstance(k, bool):
        raise InputError(f"k: expected an integer, got {k!r}")
    return C, S, k


def counting_query_from_json_dict(doc) -> tuple[tuple[int, ...], int]:
    """Parse {"W": [ints], "T": int}."""
    if not isinstance(doc, dict):
        raise InputError("counting query document: expected a JSON object")
    for field in ("W", "T"):
        if field not in doc:
            raise InputError(f"{field}: missing field")
    W = doc["W"]
    if not isinstance(W, list):
        raise InputError("W: expected a list of positive integers")
    W = _check_weights(W)
    T = doc["T"]
    if not isinstance(T, int) or isinstance(T, bool) or T < 0:
        raise InputError(f"T: expected a nonnegative integer, got {T!r}")
    return W, T
