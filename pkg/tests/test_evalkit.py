from decimal import Decimal

import pytest

from trajforge.errors import EmptySite, UnparseableVerdict
from trajforge.evalkit import (
    cost_ledger,
    delta_L,
    format_cost_ledger,
    format_success_tables,
    parse_verdict,
    success_table,
    token_stats,
)


@pytest.mark.parametrize(
    "text, verdict",
    [
        ("Looks right. SUCCESS", "SUCCESS"),
        ("not done. NOT SUCCESS", "NOT_SUCCESS"),
        ("SUCCESS would need X; verdict: NOT SUCCESS", "NOT_SUCCESS"),
        ("NOT SUCCESS at first, but on reflection SUCCESS", "SUCCESS"),
        ("NOT_SUCCESS", "NOT_SUCCESS"),
    ],
)
def test_parse_verdict_last_wins(text, verdict):
    v = parse_verdict(text)
    assert v.verdict == verdict and v.score == (1.0 if verdict == "SUCCESS" else 0.0)


def test_parse_verdict_unparseable():
    with pytest.raises(UnparseableVerdict):
        parse_verdict("SUCCESSFUL? unclear")


def test_success_table_rounding():
    t = success_table({"a": (1, 3), "b": (2, 3), "c": (1, 8)})
    assert t.rates == {"a": Decimal("33.33"), "b": Decimal("66.67"), "c": Decimal("12.50")}
    assert t.overall == Decimal("28.57")  # 4/14
    text = format_success_tables({"self": t})
    assert text.splitlines()[0].split() == ["Method", "a", "b", "c", "Avg."]
    assert "28.57" in text


def test_success_table_errors():
    with pytest.raises(EmptySite):
        success_table({"a": (0, 0)})
    with pytest.raises(EmptySite):
        success_table({})
    with pytest.raises(ValueError):
        success_table({"a": (3, 2)})


def test_delta_l_modes():
    pairs = [(3, 5), (4, 4), (6, 5), (2, 4)]
    s = delta_L(pairs)
    assert s.values == (-2, 0, 1, -2) and s.nonzero_count == 3
    assert s.mean == pytest.approx(-1.0) and s.median == -2.0
    z = delta_L(pairs, exclude_zero=False)
    assert z.mean == pytest.approx(-0.75) and z.median == -1.0


def test_delta_l_antisymmetric():
    pairs = [(3, 5), (7, 4), (2, 2), (9, 1)]
    a, b = delta_L(pairs), delta_L([(y, x) for x, y in pairs])
    assert a.values == tuple(-v for v in b.values)
    assert a.mean == -b.mean and a.median == -b.median


def test_delta_l_all_zero_undefined():
    s = delta_L([(3, 3)])
    assert not s.defined and s.nonzero_count == 0


def test_token_stats():
    s = token_stats([10, 20, 31])
    assert (s.mean, s.median, s.count) == (20.3, 20.0, 3)
    with pytest.raises(ValueError):
        token_stats([])


def test_cost_ledger_from_rate():
    led = cost_ledger({"reflection": 1_000_000, "rollback": 1234})
    assert led.per_phase["reflection"].price_usd == Decimal("4.40")
    assert led.per_phase["rollback"].price_usd == Decimal("0.01")
    assert led.total_tokens == 1_001_234 and led.total_price_usd == Decimal("4.41")
    assert "1,001,234" in format_cost_ledger(led)


def test_cost_ledger_validation():
    with pytest.raises(ValueError):
        cost_ledger({"training": 5})
    with pytest.raises(ValueError):
        cost_ledger({"reflection": -1})
