import random
from fractions import Fraction as F
from itertools import combinations

import pytest

from optmech import (
    Constraint,
    LP2Params,
    LPProblem,
    PreconditionError,
    build_lp1,
    build_lp2,
    build_lp3,
    dump_problem,
    solve_lp,
    u_var,
    unique_optimum,
)
from tests.test_core import make_instance

ZERO, ONE = F(0), F(1)


# ---------------------------------------------------------------------------
# independent oracle: exact vertex enumeration for small bounded LPs
# ---------------------------------------------------------------------------

def _solve_square(rows, rhs):
    """Gaussian elimination over Fractions; None if singular."""
    k = len(rows)
    M = [list(row) + [b] for row, b in zip(rows, rhs)]
    for col in range(k):
        pivot = next((r for r in range(col, k) if M[r][col] != 0), None)
        if pivot is None:
            return None
        M[col], M[pivot] = M[pivot], M[col]
        inv = 1 / M[col][col]
        M[col] = [v * inv for v in M[col]]
        for r in range(k):
            if r != col and M[r][col]:
                f = M[r][col]
                M[r] = [a - f * b for a, b in zip(M[r], M[col])]
    return [M[r][k] for r in range(k)]


def vertex_enumeration_max(nvars, rows, objective):
    """Max of objective over {x : row . x <= rhs} by checking every vertex.

    ``rows`` are (coeffs, rhs) inequalities, all written as <=; the polytope
    must be bounded. Independent of the simplex implementation.
    """
    best = None
    for combo in combinations(range(len(rows)), nvars):
        mat = [rows[i][0] for i in combo]
        rhs = [rows[i][1] for i in combo]
        point = _solve_square(mat, rhs)
        if point is None:
            continue
        if all(
            sum(c * x for c, x in zip(coeffs, point)) <= b for coeffs, b in rows
        ):
            value = sum(c * x for c, x in zip(objective, point))
            if best is None or value > best:
                best = value
    return best


def _box_problem(nvars, rows, objective, sense="max"):
    names = tuple(f"x{i}" for i in range(nvars))
    constraints = tuple(
        Constraint(
            {names[j]: c for j, c in enumerate(coeffs) if c},
            "<=",
            rhs,
            name=f"row{i}",
        )
        for i, (coeffs, rhs) in enumerate(rows)
    )
    return LPProblem(
        variables=names,
        objective={names[j]: c for j, c in enumerate(objective) if c},
        sense=sense,
        constraints=constraints,
        lower={name: None for name in names},
    )


# ---------------------------------------------------------------------------
# solve_lp basics
# ---------------------------------------------------------------------------

def test_solve_trivial_bounded():
    prob = LPProblem(
        variables=("x",),
        objective={"x": ONE},
        sense="max",
        constraints=(Constraint({"x": ONE}, "<=", F(3)),),
    )
    sol = solve_lp(prob)
    assert sol.status == "optimal"
    assert sol.value == 3
    assert sol.assignment == {"x": F(3)}


def test_solve_two_var_vertex():
    rows = [((F(1), F(2)), F(4)), ((ONE, ZERO), F(2)), ((-ONE, ZERO), ZERO), ((ZERO, -ONE), ZERO)]
    oracle = vertex_enumeration_max(2, rows, (ONE, ONE))
    assert oracle == 3
    prob = LPProblem(
        variables=("x", "y"),
        objective={"x": ONE, "y": ONE},
        sense="max",
        constraints=(
            Constraint({"x": ONE, "y": F(2)}, "<=", F(4)),
            Constraint({"x": ONE}, "<=", F(2)),
        ),
    )
    sol = solve_lp(prob)
    assert sol.status == "optimal"
    assert sol.value == 3
    assert sol.assignment == {"x": F(2), "y": F(1)}


def test_solve_infeasible():
    prob = LPProblem(
        variables=("x",),
        objective={"x": ONE},
        sense="max",
        constraints=(
            Constraint({"x": ONE}, ">=", ONE),
            Constraint({"x": ONE}, "<=", ZERO),
        ),
    )
    assert solve_lp(prob).status == "infeasible"


def test_solve_unbounded():
    prob = LPProblem(
        variables=("x",),
        objective={"x": ONE},
        sense="max",
        constraints=(Constraint({"x": ONE}, ">=", ZERO),),
    )
    assert solve_lp(prob).status == "unbounded"


def test_solve_min_free_variables_equalities():
    # min x + y  s.t.  x + y >= -2, x - y = 5, both free
    prob = LPProblem(
        variables=("x", "y"),
        objective={"x": ONE, "y": ONE},
        sense="min",
        constraints=(
            Constraint({"x": ONE, "y": ONE}, ">=", F(-2)),
            Constraint({"x": ONE, "y": -ONE}, "=", F(5)),
        ),
        lower={"x": None, "y": None},
    )
    sol = solve_lp(prob)
    assert sol.status == "optimal"
    assert sol.value == -2
    assert sol.assignment["x"] - sol.assignment["y"] == 5


def test_solve_respects_nondefault_bounds():
    # min x with lower bound -3 via explicit bound, upper bound unused
    prob = LPProblem(
        variables=("x",),
        objective={"x": ONE},
        sense="min",
        constraints=(),
        lower={"x": F(-3)},
        upper={"x": F(10)},
    )
    sol = solve_lp(prob)
    assert sol.value == -3


def test_solve_randomized_against_vertex_enumeration():
    rng = random.Random(42)
    for _ in range(40):
        nvars = rng.randint(1, 3)
        rows = []
        for _ in range(rng.randint(1, 4)):
            coeffs = tuple(F(rng.randint(-4, 4)) for _ in range(nvars))
            rows.append((coeffs, F(rng.randint(-3, 8))))
        # box to keep the polytope bounded so the oracle is complete
        for j in range(nvars):
            unit = tuple(ONE if i == j else ZERO for i in range(nvars))
            neg = tuple(-c for c in unit)
            rows.append((unit, F(6)))
            rows.append((neg, F(6)))
        objective = tuple(F(rng.randint(-4, 4)) for _ in range(nvars))
        oracle = vertex_enumeration_max(nvars, rows, objective)
        sol = solve_lp(_box_problem(nvars, rows, objective))
        if oracle is None:
            assert sol.status == "infeasible"
        else:
            assert sol.status == "optimal"
            assert sol.value == oracle


def test_solve_deterministic():
    prob = LPProblem(
        variables=("x", "y"),
        objective={"x": ONE, "y": ONE},
        sense="max",
        constraints=(Constraint({"x": ONE, "y": ONE}, "<=", ONE),),
    )
    first = solve_lp(prob)
    second = solve_lp(prob)
    assert first.assignment == second.assignment
    assert first.value == second.value


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def _count(prob, prefix):
    return sum(1 for c in prob.constraints if c.name.startswith(prefix))


def test_build_lp1_counts():
    inst1 = make_instance([1], [1], [(1, 2)])
    prob = build_lp1(inst1)
    assert sum(1 for v in prob.variables if v.startswith("u")) == 2
    assert sum(1 for v in prob.variables if v.startswith("q")) == 2
    assert _count(prob, "bic") == 2
    assert _count(prob, "ir") == 2

    prob = build_lp1(make_instance([1, 1], [1, 1], [(1, 2), (1, 2)]))
    assert sum(1 for v in prob.variables if v.startswith("u")) == 4
    assert sum(1 for v in prob.variables if v.startswith("q")) == 8
    assert _count(prob, "bic") == 12
    assert _count(prob, "ir") == 4


def test_lp1_uniform_optimum():
    inst = make_instance([1, 1], [1, 1], [(1, 2), (1, 2)])
    sol = solve_lp(build_lp1(inst))
    assert sol.status == "optimal"
    assert sol.value == F(9, 4)


def test_lp1_guard():
    inst = make_instance([1] * 9, [1] * 9, [(1, 2)] * 9)
    with pytest.raises(PreconditionError):
        build_lp1(inst)


PARAMS_A = LP2Params(2, (F(2), F(3)), F(9, 2), (F(1), F(2)), (F(1, 2), F(1, 2)))
PARAMS_B = LP2Params(2, (F(4), F(2)), F(5), (F(1), F(2)), (F(1, 2), F(1, 2)))


def test_build_lp2_counts_and_optimum():
    prob = build_lp2(PARAMS_A)
    assert len(prob.variables) == 4
    assert _count(prob, "bic2") == 4
    assert solve_lp(prob).value == F(1, 8)
    assert solve_lp(build_lp2(PARAMS_B)).value == F(1, 4)


def test_build_lp3_counts_and_duality():
    prob = build_lp3(PARAMS_A)
    assert len(prob.variables) == 4
    assert _count(prob, "balance") == 4
    assert solve_lp(prob).value == F(1, 8)  # equals the primal optimum exactly

    infeasible = LP2Params(2, (F(2), F(2)), F(1), (F(1), F(1)), (F(1, 2), F(1, 2)))
    assert solve_lp(build_lp3(infeasible)).status == "infeasible"


def test_lp2_lp3_strong_duality_randomized():
    rng = random.Random(9)
    for _ in range(25):
        n = rng.randint(1, 4)
        x = tuple(F(rng.randint(1, 12), rng.randint(1, 6)) for _ in range(n))
        d = tuple(F(rng.randint(1, 12), rng.randint(1, 6)) for _ in range(n))
        p = tuple(F(rng.randint(1, 11), 12) for _ in range(n))
        total = sum(x)
        expected = sum(pi * xi for pi, xi in zip(p, x))
        # any B >= sum(p x) keeps both programs feasible
        B = expected + F(rng.randint(0, 5), 3)
        if B <= 0:
            continue
        params = LP2Params(n, x, B, d, p)
        primal = solve_lp(build_lp2(params))
        dual = solve_lp(build_lp3(params))
        assert primal.status == "optimal" and dual.status == "optimal"
        assert primal.value == dual.value


# ---------------------------------------------------------------------------
# uniqueness probe
# ---------------------------------------------------------------------------

def test_unique_optimum_trivial():
    prob = LPProblem(
        variables=("x",),
        objective={"x": ONE},
        sense="max",
        constraints=(Constraint({"x": ONE}, "<=", ONE),),
    )
    sol = solve_lp(prob)
    assert unique_optimum(prob, sol) is True


def test_unique_optimum_edge_of_optima():
    prob = LPProblem(
        variables=("x", "y"),
        objective={"x": ONE, "y": ONE},
        sense="max",
        constraints=(Constraint({"x": ONE, "y": ONE}, "<=", ONE),),
    )
    sol = solve_lp(prob)
    assert unique_optimum(prob, sol) is False


def test_unique_optimum_relaxed_program():
    prob = build_lp2(PARAMS_A)
    sol = solve_lp(prob)
    assert unique_optimum(prob, sol) is True
    # sanity: the unique optimum is the closed-form utility
    assert sol.assignment[u_var(frozenset({1, 2}))] == 1


def test_unique_optimum_requires_optimal():
    prob = LPProblem(
        variables=("x",),
        objective={"x": ONE},
        sense="max",
        constraints=(Constraint({"x": ONE}, ">=", ONE), Constraint({"x": ONE}, "<=", ZERO)),
    )
    sol = solve_lp(prob)
    with pytest.raises(PreconditionError):
        unique_optimum(prob, sol)


# ---------------------------------------------------------------------------
# dump
# ---------------------------------------------------------------------------

def test_dump_problem_lists_every_constraint():
    prob = build_lp2(PARAMS_A)
    text = dump_problem(prob)
    assert "sense: max" in text
    for con in prob.constraints:
        assert con.name in text
    assert text.count("bic2") == 4


def test_lp2_lp3_strong_duality_n6():
    rng = random.Random(6)
    for _ in range(3):
        n = 6
        x = tuple(F(rng.randint(1, 12), rng.randint(1, 6)) for _ in range(n))
        d = tuple(F(rng.randint(1, 12), rng.randint(1, 6)) for _ in range(n))
        p = tuple(F(rng.randint(1, 11), 12) for _ in range(n))
        B = sum(pi * xi for pi, xi in zip(p, x)) + F(rng.randint(1, 5), 3)
        params = LP2Params(n, x, B, d, p)
        assert solve_lp(build_lp2(params)).value == solve_lp(build_lp3(params)).value


def test_lp2_lp3_guard():
    params = LP2Params(
        15,
        (F(1),) * 15,
        F(100),
        (F(1),) * 15,
        (F(1, 2),) * 15,
    )
    with pytest.raises(PreconditionError):
        build_lp2(params)
    with pytest.raises(PreconditionError):
        build_lp3(params)


def test_lexrank_oracle_guard():
    from optmech import lexrank_oracle

    with pytest.raises(PreconditionError):
        lexrank_oracle(tuple(range(1, 24)), frozenset({1}))


def test_fraction_backend_fallback(monkeypatch):
    # force the pure-Fraction tableau path and re-check an exact optimum
    import optmech.exactlp as xlp

    monkeypatch.setattr(xlp, "_mpq", None)
    inst = make_instance([1, 1], [1, 2], [(1, 2), (1, 2)])
    sol = xlp.solve_lp(xlp.build_lp1(inst))
    assert sol.status == "optimal"
    assert sol.value == F(21, 8)
    assert all(isinstance(v, F) for v in sol.assignment.values())
