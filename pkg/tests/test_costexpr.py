import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from motlab.costexpr import (EvalError, ParseError, as_payoff, evaluate, lint_linear_growth, parse,
                             to_text)

# (text, x1, x2, value) with values worked out by hand
CORPUS = [
    ("1 + 2 * 3", 0, 0, 7),
    ("(1 + 2) * 3", 0, 0, 9),
    ("8 - 3 - 2", 0, 0, 3),
    ("8 - (3 - 2)", 0, 0, 7),
    ("24 / 4 / 2", 0, 0, 3),
    ("24 / (4 / 2)", 0, 0, 12),
    ("-2 * 3", 0, 0, -6),
    ("-(2 - 5)", 0, 0, 3),
    ("--x1", 4, 0, 4),
    ("2 * -x1", 3, 0, -6),
    ("x1 - -x2", 1, 2, 3),
    ("x1 + x2 * x1", 2, 3, 8),
    ("(x1 + x2) * x1", 2, 3, 10),
    ("x2 / x1 * 2", 2, 6, 6),
    ("x2 - x1 / 2", 2, 6, 5),
    ("abs(x2 - x1)", 1, -2, 3),
    ("abs(x1) * 2 + 1", -3, 0, 7),
    ("-abs(x1 - 5)", 1, 0, -4),
    ("max(x1, x2, 0)", -1, -2, 0),
    ("min(x1, x2) - max(x1, x2)", 1, 4, -3),
    ("call(x2, 1.5)", 0, 2, 0.5),
    ("call(x2, 1.5) - 0.25*x1", 4, 1, -1),
    ("put(x2, 1.5)", 0, 1, 0.5),
    ("put(x2, x1) + call(x2, x1)", 1, 3, 2),
    ("x1*x2", -1, 2, -2),
    ("3*x1 - 2*x2 + 1", 1, 1, 2),
    ("1.5e1 / 3", 0, 0, 5),
    ("max(abs(x1), min(x2, 10))", -2, 7, 7),
]


class TestParse:
    def test_examples(self):
        assert repr(parse("abs(x2 - x1)").ast) == "Abs(Sub(x2, x1))"
        assert repr(parse("call(x2, 1.5) - 0.25*x1").ast) == "Sub(Call(x2, 1.5), Mul(0.25, x1))"

    def test_error_column(self):
        with pytest.raises(ParseError) as exc:
            parse("x1 + + x2")
        assert exc.value.column == 6

    @pytest.mark.parametrize("text,column", [
        ("", 1), ("x1 +", 5), ("(x1", 4), ("x3", 1), ("abs(x1, x2)", 1), ("call(x1)", 1),
        ("x1 $ x2", 4), ("x1 x2", 4), ("foo(x1)", 1), ("x1 )", 4),
    ])
    def test_errors(self, text, column):
        with pytest.raises(ParseError) as exc:
            parse(text)
        assert exc.value.column == column

    def test_whitespace_insensitive(self):
        assert parse("abs( x2-x1 )").ast == parse("abs(x2 - x1)").ast

    @pytest.mark.parametrize("text,x1,x2,value", CORPUS)
    def test_precedence_corpus(self, text, x1, x2, value):
        assert evaluate(parse(text), x1, x2) == pytest.approx(value, abs=1e-12)

    @pytest.mark.parametrize("text", [c[0] for c in CORPUS])
    def test_print_parse_idempotent(self, text):
        e = parse(text)
        again = parse(to_text(e))
        assert again.ast == e.ast
        assert to_text(again) == to_text(e)


class TestEvaluate:
    def test_examples(self):
        assert evaluate(parse("abs(x2-x1)"), 1, -2) == 3
        assert evaluate(parse("call(x2,1.5)"), 0, 2) == 0.5
        assert evaluate(parse("x1*x2"), -1, 2) == -2

    def test_division_by_zero(self):
        with pytest.raises(EvalError):
            evaluate(parse("1 / (x1 - x2)"), 1, 1)

    def test_non_finite_result(self):
        with pytest.raises(EvalError):
            evaluate(parse("x1 * x1 * x1 * x1 * x1"), 1e100, 0)

    def test_grid(self):
        e = parse("x2 - x1")
        np.testing.assert_array_equal(e.grid([0, 1], [2, 3, 4]), [[2, 3, 4], [1, 2, 3]])

    def test_as_payoff(self):
        e = parse("x1")
        assert as_payoff(e) is e
        assert as_payoff("x1").ast == e.ast
        with pytest.raises(TypeError):
            as_payoff(3)

    @given(st.sampled_from([c[0] for c in CORPUS]),
           st.floats(-50, 50), st.floats(-50, 50))
    def test_vectorised_matches_scalar(self, text, a, b):
        e = parse(text)
        try:
            s = evaluate(e, a, b)
        except EvalError:
            return
        v = evaluate(e, np.array([a, a]), np.array([b, b]))
        assert v.tolist() == [s, s]


class TestLint:
    @pytest.mark.parametrize("text", ["abs(x2-x1)", "3*x1", "x1 / 4", "call(x2, 1) - 2*x1", "-x1 * 2"])
    def test_ok(self, text):
        assert lint_linear_growth(parse(text)).ok

    def test_product(self):
        r = lint_linear_growth(parse("x1*x2"))
        assert not r.ok and r.reason == "product of variable terms"
        assert not lint_linear_growth(parse("abs(x1) * (x2 + 1)")).ok

    def test_division(self):
        r = lint_linear_growth(parse("1 / x1"))
        assert not r.ok and r.reason == "division by a variable term"
