"""Grammar, binding, evaluation, and algebraic properties of the
treatment-definition expressions."""

import numpy as np
import pytest

from psm_workbench import treatment_dsl as dsl
from psm_workbench.errors import (DegenerateTreatmentError, DslBindError,
                                  DslLexError, DslSyntaxError)
from psm_workbench.treatment_dsl import (AndExpr, ColumnRef, Comparison, NotExpr,
                                         NumberLit, OrExpr, StringLit)

from conftest import build_dataset


def _dataset():
    return build_dataset(
        {
            "y": np.array([1.0, 2.0, 3.0]),
            "x": np.array([-1.0, 2.0, 3.0]),
            "age": np.array([25.0, 35.0, 45.0]),
            "country": np.array(["NL", "DE", "NL"]),
            "promo": np.array([1.0, 0.0, 1.0]),
        },
        covariates=[
            ("x", "continuous", ()),
            ("age", "continuous", ()),
            ("country", "categorical", ("NL", "DE")),
            ("promo", "binary", ()),
        ],
    )


class TestParse:
    def test_and_of_comparisons(self):
        ast = dsl.parse("age > 30 AND country == 'NL'")
        assert ast == AndExpr(
            Comparison(">", ColumnRef("age"), NumberLit(30.0)),
            Comparison("==", ColumnRef("country"), StringLit("NL")),
        )

    def test_not_with_parenthesized_or(self):
        ast = dsl.parse("NOT (x < 1 OR y < 1)")
        assert ast == NotExpr(OrExpr(
            Comparison("<", ColumnRef("x"), NumberLit(1.0)),
            Comparison("<", ColumnRef("y"), NumberLit(1.0)),
        ))

    def test_dangling_operator_offset(self):
        with pytest.raises(DslSyntaxError) as e:
            dsl.parse("age >")
        assert e.value.offset == 6
        assert "column" in e.value.expected

    def test_precedence_not_over_and_over_or(self):
        ast = dsl.parse("NOT a == 1 AND b == 1 OR c == 1")
        assert isinstance(ast, OrExpr)
        assert isinstance(ast.left, AndExpr)
        assert isinstance(ast.left.left, NotExpr)

    def test_and_left_associative(self):
        ast = dsl.parse("a == 1 AND b == 1 AND c == 1")
        assert isinstance(ast, AndExpr)
        assert isinstance(ast.left, AndExpr)

    def test_unterminated_string(self):
        with pytest.raises(DslLexError) as e:
            dsl.parse("country == 'NL")
        assert e.value.offset == 12

    def test_illegal_character(self):
        with pytest.raises(DslLexError) as e:
            dsl.parse("age > 30 & x > 0")
        assert e.value.offset == 10

    def test_trailing_garbage(self):
        with pytest.raises(DslSyntaxError):
            dsl.parse("age > 30 x")

    def test_numbers(self):
        ast = dsl.parse("x > -1.5e2")
        assert ast == Comparison(">", ColumnRef("x"), NumberLit(-150.0))


def _random_expr(rng, depth=0):
    cols = [("x", "num"), ("age", "num"), ("promo", "num"), ("country", "cat")]
    if depth > 3 or rng.random() < 0.35:
        name, kind = cols[rng.integers(0, len(cols))]
        if kind == "num":
            op = ("==", "!=", "<", "<=", ">", ">=")[rng.integers(0, 6)]
            return Comparison(op, ColumnRef(name), NumberLit(float(rng.integers(-3, 4))))
        op = ("==", "!=")[rng.integers(0, 2)]
        return Comparison(op, ColumnRef(name), StringLit(("NL", "DE")[rng.integers(0, 2)]))
    kind = rng.integers(0, 3)
    if kind == 0:
        return NotExpr(_random_expr(rng, depth + 1))
    node = AndExpr if kind == 1 else OrExpr
    return node(_random_expr(rng, depth + 1), _random_expr(rng, depth + 1))


class TestPrinterRoundTrip:
    def test_examples(self):
        for src in [
            "age > 30 AND country == 'NL'",
            "NOT (x < 1 OR y < 1)",
            "NOT x < 1",
            "a == 1 AND (b == 2 OR c == 3)",
            "(a == 1 OR b == 2) AND NOT c == 3",
        ]:
            ast = dsl.parse(src)
            assert dsl.parse(dsl.to_source(ast)) == ast

    def test_random_asts(self, rng):
        for _ in range(300):
            ast = _random_expr(rng)
            printed = dsl.to_source(ast)
            assert dsl.parse(printed) == ast, printed

    def test_right_nested_needs_parens(self):
        ast = OrExpr(
            Comparison("==", ColumnRef("a"), NumberLit(1.0)),
            OrExpr(Comparison("==", ColumnRef("b"), NumberLit(2.0)),
                   Comparison("==", ColumnRef("c"), NumberLit(3.0))),
        )
        assert dsl.parse(dsl.to_source(ast)) == ast


class TestBindAndAssign:
    def test_rowwise_evaluation(self):
        ds = _dataset()
        assignment = dsl.assign(dsl.parse("x > 0"), ds)
        np.testing.assert_array_equal(assignment.values, [0.0, 1.0, 1.0])
        assert assignment.n_treated == 2
        assert assignment.n_control == 1

    def test_tautology_degenerate(self):
        with pytest.raises(DegenerateTreatmentError, match="degenerate treatment"):
            dsl.assign(dsl.parse("x == x"), _dataset())

    def test_unknown_column_named(self):
        with pytest.raises(DslBindError, match="'zz'"):
            dsl.assign(dsl.parse("zz > 0"), _dataset())

    def test_outcome_not_usable(self):
        with pytest.raises(DslBindError, match="outcome"):
            dsl.assign(dsl.parse("y > 1"), _dataset())

    def test_type_mismatch(self):
        with pytest.raises(DslBindError, match="type mismatch"):
            dsl.bind(dsl.parse("age == 'NL'"), _dataset().schema)

    def test_categorical_ordering_rejected(self):
        with pytest.raises(DslBindError, match="not defined for categorical"):
            dsl.bind(dsl.parse("country < 'NL'"), _dataset().schema)

    def test_categorical_equality(self):
        assignment = dsl.assign(dsl.parse("country == 'NL'"), _dataset())
        np.testing.assert_array_equal(assignment.values, [1.0, 0.0, 1.0])

    def test_boolean_combinators(self):
        assignment = dsl.assign(dsl.parse("x > 0 AND NOT country == 'NL'"), _dataset())
        np.testing.assert_array_equal(assignment.values, [0.0, 1.0, 0.0])


class TestProperties:
    def test_de_morgan(self, rng):
        """NOT(a AND b) and (NOT a OR NOT b) assign identically."""
        for trial in range(60):
            n = int(rng.integers(3, 30))
            ds = build_dataset(
                {
                    "y": rng.standard_normal(n),
                    "x": rng.integers(-3, 4, n).astype(float),
                    "age": rng.integers(-3, 4, n).astype(float),
                    "promo": rng.integers(0, 2, n).astype(float),
                    "country": np.array(["NL", "DE"])[rng.integers(0, 2, n)],
                },
                covariates=[("x", "continuous", ()), ("age", "continuous", ()),
                            ("promo", "binary", ()),
                            ("country", "categorical", ("NL", "DE"))],
            )
            a = _random_expr(rng, depth=3)
            b = _random_expr(rng, depth=3)
            lhs = dsl._eval(NotExpr(AndExpr(a, b)), ds)
            rhs = dsl._eval(OrExpr(NotExpr(a), NotExpr(b)), ds)
            np.testing.assert_array_equal(lhs, rhs)

    def test_row_order_independence(self, rng):
        n = 40
        x = rng.standard_normal(n)
        ds1 = build_dataset({"y": np.zeros(n), "x": x},
                            covariates=[("x", "continuous", ())])
        expr = dsl.parse("x > 0")
        vals1 = dsl._eval(expr, ds1)
        perm = rng.permutation(n)
        ds2 = build_dataset({"y": np.zeros(n), "x": x[perm]},
                            covariates=[("x", "continuous", ())])
        vals2 = dsl._eval(expr, ds2)
        np.testing.assert_array_equal(vals1[perm], vals2)

    def test_evaluation_deterministic(self):
        ds = _dataset()
        expr = dsl.parse("age >= 35 AND promo == 1")
        a = dsl.assign(expr, ds)
        b = dsl.assign(expr, ds)
        np.testing.assert_array_equal(a.values, b.values)
