"""Exact-arithmetic foundations: rationals, item subsets, instances, parameters.

Every quantity in this package is a `fractions.Fraction`; there is no floating
point anywhere. Items are numbered 1..n. A bidder *type* is the subset of
items she values high, represented as a ``frozenset`` of 1-based indices.

An instance is the triple of per-item low values ``a``, increments ``d`` and
high-value probabilities ``p``: item ``i`` is worth ``a[i]`` with probability
``1 - p[i]`` and ``a[i] + d[i]`` with probability ``p[i]``, independently.

`LP2Params` is the transformed parameterization ``(x, B, d, p)`` used by the
relaxed program and its flow dual; `to_lp2_params` / `from_lp2_params` map
between the two representations exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import InputError, PreconditionError

# The package-wide rational type. `fractions.Fraction` already guarantees the
# required representation invariants: lowest terms, positive denominator,
# exact +, -, *, / and comparisons on arbitrary-precision integers.
Rational = Fraction

# A type / lattice node: frozenset of 1-based item indices.
Subset = frozenset

ZERO = Fraction(0)
ONE = Fraction(1)


# ---------------------------------------------------------------------------
# Rational parsing and formatting ("num/den" wire format)
# ---------------------------------------------------------------------------

def parse_rational(value, field: str = "value") -> Fraction:
    """Parse an external rational: "9/2", "-3/1", "4", or an int.

    Floats are rejected: the wire formats are exact by contract.
    """
    if isinstance(value, bool):
        raise InputError(f"{field}: expected a rational, got a boolean")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        text = value.strip()
        try:
            if "/" in text:
                num, den = text.split("/", 1)
                return Fraction(int(num.strip()), int(den.strip()))
            return Fraction(int(text))
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"{field}: invalid rational {value!r}: {exc}") from None
    raise InputError(f"{field}: expected a rational string, got {type(value).__name__}")


def format_rational(value: Fraction) -> str:
    """Serialize exactly: "9/2" or, for integers, just "4"."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


# ---------------------------------------------------------------------------
# Subsets of the ground set {1..n}
# ---------------------------------------------------------------------------

def item_range(n: int) -> range:
    """The ground set 1..n as a range."""
    return range(1, n + 1)


def subset_mask(S: Subset) -> int:
    """Binary encoding sum(2^i for i in S); orders subsets lexicographically
    in the convention used throughout (larger top element sorts later)."""
    mask = 0
    for i in S:
        mask |= 1 << i
    return mask


def all_subsets(n: int) -> list[Subset]:
    """All 2^n subsets of {1..n} in increasing mask order (the canonical
    enumeration order everywhere in this package)."""
    out = []
    for mask in range(1 << n):
        out.append(frozenset(i for i in item_range(n) if mask >> (i - 1) & 1))
    return out


def check_subset(S: Iterable[int], n: int, field: str = "subset") -> Subset:
    """Validate indices against the ground set and return a frozenset."""
    out = frozenset(S)
    for i in out:
        if not isinstance(i, int) or isinstance(i, bool) or not 1 <= i <= n:
            raise InputError(f"{field}: item index {i!r} out of range 1..{n}")
    return out


def subset_to_list(S: Subset) -> list[int]:
    """Canonical external form: sorted ascending 1-based indices."""
    return sorted(S)


def subset_label(S: Subset) -> str:
    """Human-readable form used in dumps and constraint names: "{}", "{1,3}"."""
    return "{" + ",".join(str(i) for i in sorted(S)) + "}"


def subset_prob(p: Sequence[Fraction], S: Subset) -> Fraction:
    """prod_{i in S} p_i * prod_{j not in S} (1 - p_j) over ground set 1..len(p)."""
    result = ONE
    for i in item_range(len(p)):
        result *= p[i - 1] if i in S else ONE - p[i - 1]
    return result


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OMDInstance:
    """A single additive bidder with independent two-point item values.

    ``d[i] > 0`` and ``0 < p[i] < 1`` always; ``a[i] >= 0``, where ``a[i] = 0``
    is admitted at the type level (the brute-force LP oracle handles it) but
    rejected by the structured pipeline via `to_lp2_params`.
    """

    n: int
    a: tuple[Fraction, ...]
    d: tuple[Fraction, ...]
    p: tuple[Fraction, ...]

    def __post_init__(self):
        if self.n < 1:
            raise InputError(f"n: must be >= 1, got {self.n}")
        for field in ("a", "d", "p"):
            seq = getattr(self, field)
            if not isinstance(seq, tuple):
                object.__setattr__(self, field, tuple(seq))
                seq = getattr(self, field)
            if len(seq) != self.n:
                raise InputError(f"{field}: expected {self.n} entries, got {len(seq)}")
            if not all(isinstance(v, Fraction) for v in seq):
                raise InputError(f"{field}: entries must be rationals")
        for i, v in enumerate(self.a, start=1):
            if v < 0:
                raise InputError(f"a: entry {i} must be >= 0, got {format_rational(v)}")
        for i, v in enumerate(self.d, start=1):
            if v <= 0:
                raise InputError(f"d: entry {i} must be > 0, got {format_rational(v)}")
        for i, v in enumerate(self.p, start=1):
            if not ZERO < v < ONE:
                raise InputError(f"p: entry {i} must lie in (0,1), got {format_rational(v)}")


@dataclass(frozen=True)
class LP2Params:
    """Parameters (x, B, d, p) of the relaxed program / lattice flow problem.

    ``kappa`` is not stored: the identities defining the parameter map force
    ``kappa == B - sum_i p_i x_i`` whenever an instance is attached, so it is
    exposed as a derived property. It may be <= 0 for parameter vectors that
    do not correspond to any instance (those are still legal inputs for the
    LP builders, e.g. to witness infeasibility).
    """

    n: int
    x: tuple[Fraction, ...]
    B: Fraction
    d: tuple[Fraction, ...]
    p: tuple[Fraction, ...]

    def __post_init__(self):
        if self.n < 1:
            raise InputError(f"n: must be >= 1, got {self.n}")
        for field in ("x", "d", "p"):
            seq = getattr(self, field)
            if not isinstance(seq, tuple):
                object.__setattr__(self, field, tuple(seq))
                seq = getattr(self, field)
            if len(seq) != self.n:
                raise InputError(f"{field}: expected {self.n} entries, got {len(seq)}")
        if not isinstance(self.B, Fraction) or self.B <= 0:
            raise InputError("B: must be a positive rational")
        for i, v in enumerate(self.x, start=1):
            if v <= 0:
                raise InputError(f"x: entry {i} must be > 0, got {format_rational(v)}")
        for i, v in enumerate(self.d, start=1):
            if v <= 0:
                raise InputError(f"d: entry {i} must be > 0, got {format_rational(v)}")
        for i, v in enumerate(self.p, start=1):
            if not ZERO < v < ONE:
                raise InputError(f"p: entry {i} must lie in (0,1), got {format_rational(v)}")

    @property
    def kappa(self) -> Fraction:
        return self.B - sum((pi * xi for pi, xi in zip(self.p, self.x)), ZERO)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def type_prob(inst: OMDInstance, S: Subset) -> Fraction:
    """Probability that the realized type is exactly S."""
    S = check_subset(S, inst.n)
    return subset_prob(inst.p, S)


def type_vector(inst: OMDInstance, S: Subset) -> tuple[Fraction, ...]:
    """Valuation vector of type S: component i is a_i + d_i if i in S else a_i."""
    S = check_subset(S, inst.n)
    return tuple(
        inst.a[i - 1] + inst.d[i - 1] if i in S else inst.a[i - 1]
        for i in item_range(inst.n)
    )


def to_lp2_params(inst: OMDInstance, kappa: Fraction) -> LP2Params:
    """Map an instance to relaxed-program parameters at scale kappa > 0:

        B = kappa * (1 + sum_i a_i/d_i)    x_i = kappa * a_i / (p_i d_i)

    Requires every a_i > 0 (so that every x_i > 0).
    """
    if kappa <= 0:
        raise PreconditionError(f"kappa must be > 0, got {format_rational(kappa)}")
    for i in item_range(inst.n):
        if inst.a[i - 1] == 0:
            raise PreconditionError(
                f"a: entry {i} is 0; the structured pipeline requires a_i > 0"
            )
    B = kappa * (ONE + sum((ai / di for ai, di in zip(inst.a, inst.d)), ZERO))
    x = tuple(
        kappa * inst.a[i - 1] / (inst.p[i - 1] * inst.d[i - 1])
        for i in item_range(inst.n)
    )
    return LP2Params(n=inst.n, x=x, B=B, d=inst.d, p=inst.p)


def from_lp2_params(params: LP2Params) -> tuple[OMDInstance, Fraction]:
    """Invert the parameter map: kappa = B - sum p_i x_i, a_i = p_i d_i x_i / kappa.

    Requires B > sum p_i x_i strictly; round-tripping through `to_lp2_params`
    with the returned kappa reproduces (x, B) exactly.
    """
    kappa = params.kappa
    if kappa <= 0:
        raise PreconditionError(
            "infeasible parameterization: B <= sum(p_i x_i) "
            f"(B = {format_rational(params.B)}, "
            f"sum = {format_rational(params.B - kappa)})"
        )
    a = tuple(
        params.p[i - 1] * params.d[i - 1] * params.x[i - 1] / kappa
        for i in item_range(params.n)
    )
    inst = OMDInstance(n=params.n, a=a, d=params.d, p=params.p)
    return inst, kappa


# ---------------------------------------------------------------------------
# Instance JSON document
# ---------------------------------------------------------------------------

def instance_to_json_dict(inst: OMDInstance) -> dict:
    return {
        "n": inst.n,
        "a": [format_rational(v) for v in inst.a],
        "d": [format_rational(v) for v in inst.d],
        "p": [format_rational(v) for v in inst.p],
    }


def instance_from_json_dict(doc) -> OMDInstance:
    """Parse {"n": int, "a": [...], "d": [...], "p": [...]}; errors name the field."""
    if not isinstance(doc, dict):
        raise InputError("instance document: expected a JSON object")
    if "n" not in doc:
        raise InputError("n: missing field")
    n = doc["n"]
    if not isinstance(n, int) or isinstance(n, bool):
        raise InputError(f"n: expected an integer, got {n!r}")
    seqs = {}
    for field in ("a", "d", "p"):
        if field not in doc:
            raise InputError(f"{field}: missing field")
        raw = doc[field]
        if not isinstance(raw, list):
            raise InputError(f"{field}: expected a list of rational strings")
        if len(raw) != n:
            raise InputError(f"{field}: expected {n} entries, got {len(raw)}")
        seqs[field] = tuple(
            parse_rational(v, field=f"{field}[{i}]") for i, v in enumerate(raw, start=1)
        )
    return OMDInstance(n=n, a=seqs["a"], d=seqs["d"], p=seqs["p"])


def instance_to_json(inst: OMDInstance) -> str:
    return json.dumps(instance_to_json_dict(inst), indent=2) + "\n"


def instance_from_json(text: str) -> OMDInstance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"instance document: invalid JSON: {exc}") from None
    return instance_from_json_dict(doc)
