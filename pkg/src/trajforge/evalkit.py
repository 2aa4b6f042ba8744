"""Judging and reporting: verdict parsing, success tables, length deltas, token and cost statistics."""

from __future__ import annotations

import re
import statistics
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Literal, Mapping, Sequence

from .errors import EmptySite, UnparseableVerdict
from .model import QueryRecord, Trajectory
from .prompts import JUDGE_SYSTEM, JUDGE_USER
from .protocol import render_action

Verdict = Literal["SUCCESS", "NOT_SUCCESS"]

_VERDICT = re.compile(r"\bNOT[ _]SUCCESS\b|\bSUCCESS\b")


@dataclass(frozen=True)
class JudgeVerdict:
    verdict: Verdict
    rationale: str

    @property
    def score(self) -> float:
        return 1.0 if self.verdict == "SUCCESS" else 0.0


def parse_verdict(text: str) -> JudgeVerdict:
    """The last verdict token in the reply is the definitive one.

    The alternation tries ``NOT SUCCESS`` first at every position, so the
    ``SUCCESS`` inside it is never counted on its own.
    """
    hits = list(_VERDICT.finditer(text))
    if not hits:
        raise UnparseableVerdict(f"no verdict in judge reply: {text[:120]!r}")
    last = hits[-1]
    verdict: Verdict = "SUCCESS" if last.group(0) == "SUCCESS" else "NOT_SUCCESS"
    return JudgeVerdict(verdict, text[: last.start()].strip())


def action_history(traj: Trajectory) -> str:
    return "\n".join(f"{i}. {render_action(s.action)}" for i, s in enumerate(traj.steps, 1)) or "(none)"


def judge_trajectory(backend, q: QueryRecord, traj: Trajectory) -> JudgeVerdict:
    final = traj.steps[-1].observation.tree_text if traj.steps else ""
    answer = traj.answer
    user = JUDGE_USER.format(
        task=q.query_text,
        actions=action_history(traj),
        observation=final,
        response=answer if answer is not None else "(no response)",
    )
    meta = {
        "task": "judge",
        "query_id": q.query_id,
        "length": len(traj),
        "fingerprint": traj.steps[-1].observation.fingerprint if traj.steps else "",
        "answer": answer if answer is not None else "",
    }
    reply = backend.complete(JUDGE_SYSTEM, [{"role": "user", "content": user}], meta)
    return parse_verdict(reply.text)


# --- success tables ----------------------------------------------------------

_CENT = Decimal("0.01")


def _pct(successes: int, total: int) -> Decimal:
    return (Decimal(100) * successes / Decimal(total)).quantize(_CENT, rounding=ROUND_HALF_UP)


@dataclass(frozen=True)
class SuccessTable:
    rates: dict[str, Decimal]
    overall: Decimal
    counts: dict[str, tuple[int, int]]


def success_table(results: Mapping[str, tuple[int, int]]) -> SuccessTable:
    """Per-site success percentages and the pooled overall rate, all to 2 decimals."""
    rates, counts = {}, {}
    for site, (succ, total) in results.items():
        if total <= 0:
            raise EmptySite(f"site {site!r} has no queries")
        if not 0 <= succ <= total:
            raise ValueError(f"site {site!r}: {succ} successes out of {total}")
        rates[site] = _pct(succ, total)
        counts[site] = (succ, total)
    if not counts:
        raise EmptySite("no sites to tabulate")
    overall = _pct(sum(s for s, _ in counts.values()), sum(t for _, t in counts.values()))
    return SuccessTable(rates, overall, counts)


def format_success_tables(tables: Mapping[str, SuccessTable]) -> str:
    """Aligned text table: one row per method, one column per site plus the average."""
    sites: list[str] = []
    for t in tables.values():
        sites.extend(s for s in t.rates if s not in sites)
    header = ["Method", *sites, "Avg."]
    rows = [header]
    for name, t in tables.items():
        rows.append([name, *(str(t.rates[s]) if s in t.rates else "-" for s in sites), str(t.overall)])
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for n, r in enumerate(rows):
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


# --- trajectory length deltas ------------------------------------------------


@dataclass(frozen=True)
class DeltaLStats:
    values: tuple[int, ...]
    nonzero_count: int
    mean: float | None
    median: float | None

    @property
    def defined(self) -> bool:
        return self.mean is not None


def delta_L(pairs: Iterable[tuple[int, int]], exclude_zero: bool = True) -> DeltaLStats:
    """Per-query length difference ``len_a - len_b``.

    By default queries with identical lengths are left out of the mean and
    median; ``exclude_zero=False`` keeps them.
    """
    values = []
    for a, b in pairs:
        if a < 1 or b < 1:
            raise ValueError(f"trajectory lengths must be >= 1, got ({a}, {b})")
        values.append(a - b)
    nonzero = [v for v in values if v != 0]
    pool = nonzero if exclude_zero else values
    if not pool:
        return DeltaLStats(tuple(values), len(nonzero), None, None)
    return DeltaLStats(tuple(values), len(nonzero), statistics.fmean(pool), float(statistics.median(pool)))


# --- token statistics --------------------------------------------------------


@dataclass(frozen=True)
class TokenStats:
    mean: float
    median: float
    count: int


def token_stats(per_query_tokens: Sequence[int]) -> TokenStats:
    if not per_query_tokens:
        raise ValueError("token_stats needs at least one query")
    mean = Decimal(sum(per_query_tokens)) / len(per_query_tokens)
    return TokenStats(
        float(mean.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)),
        float(statistics.median(per_query_tokens)),
        len(per_query_tokens),
    )


# --- cost ledger -------------------------------------------------------------

PHASES = ("reflection", "branching", "rollback")
DEFAULT_PRICE_PER_TOKEN = Decimal("0.0000044")


@dataclass(frozen=True)
class PhaseCost:
    tokens: int
    price_usd: Decimal


@dataclass(frozen=True)
class CostLedger:
    per_phase: dict[str, PhaseCost] = field(default_factory=dict)

    @property
    def total_tokens(self) -> int:
        return sum(p.tokens for p in self.per_phase.values())

    @property
    def total_price_usd(self) -> Decimal:
        return sum((p.price_usd for p in self.per_phase.values()), Decimal("0.00"))

    def to_dict(self) -> dict:
        return {
            "per_phase": {k: {"tokens": v.tokens, "price_usd": str(v.price_usd)} for k, v in self.per_phase.items()},
            "total_tokens": self.total_tokens,
            "total_price_usd": str(self.total_price_usd),
        }


def cost_ledger(phase_entries: Mapping[str, int | tuple[int, str | Decimal | None]], price_per_token=DEFAULT_PRICE_PER_TOKEN) -> CostLedger:
    """Build a ledger from ``{phase: tokens}`` or ``{phase: (tokens, price)}``.

    Missing prices are ``tokens * price_per_token`` rounded to cents. Prices
    are handled as decimals throughout.
    """
    rate = Decimal(str(price_per_token))
    per_phase = {}
    for phase, entry in phase_entries.items():
        if phase not in PHASES:
            raise ValueError(f"unknown phase {phase!r}")
        tokens, price = (entry, None) if isinstance(entry, int) else entry
        if tokens < 0:
            raise ValueError(f"negative token count for {phase!r}")
        price = Decimal(str(price)) if price is not None else (tokens * rate).quantize(_CENT, rounding=ROUND_HALF_UP)
        per_phase[phase] = PhaseCost(int(tokens), price)
    return CostLedger(per_phase)


def format_cost_ledger(ledger: CostLedger) -> str:
    rows = [("Method", "Token Num.", "Price $")]
    for phase, p in ledger.per_phase.items():
        rows.append((phase.capitalize(), f"{p.tokens:,}", str(p.price_usd)))
    rows.append(("Total", f"{ledger.total_tokens:,}", str(ledger.total_price_usd)))
    w = [max(len(r[i]) for r in rows) for i in range(3)]
    return "\n".join(f"{a.ljust(w[0])}  {b.rjust(w[1])}  {c.rjust(w[2])}" for a, b, c in rows) + "\n"
