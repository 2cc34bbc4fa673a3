"""Result extraction from a replay database: top-k tables, per-epsilon stage
statistics, and structural queries over the stored block sequences."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

from .catalog import parse_code
from .space import decode_net

VALID_QUERIES = ("contains", "swap_pairs", "concat_effect")


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class DbRow:
    iteration: int
    epsilon: float
    net: str
    accuracy: float
    params: int
    cached: bool
    status: str
    timestamp: float


def load_db(path: str | Path) -> list[DbRow]:
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            rows.append(
                DbRow(
                    iteration=int(rec["iteration"]),
                    epsilon=float(rec["epsilon"]),
                    net=str(rec["net"]),
                    accuracy=float(rec["accuracy"]),
                    params=int(rec["params"]),
                    cached=bool(rec["cached"]),
                    status=str(rec["status"]),
                    timestamp=float(rec["timestamp"]),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise AnalysisError(f"replay DB line {lineno}: {e}") from None
    return rows


def unique_rows(rows: list[DbRow]) -> list[DbRow]:
    """The rows recording a first evaluation (cache hits dropped)."""
    return [r for r in rows if not r.cached]


def format_params(params: int) -> str:
    return f"{params / 1e6:.2f}M"


def format_accuracy(accuracy: float) -> str:
    return f"{accuracy * 100:.2f}"


def top_k(rows: list[DbRow], k: int) -> list[DbRow]:
    """Best-accuracy unique entries; ties go to the earlier iteration."""
    if not rows:
        raise AnalysisError("replay DB is empty")
    uniq = unique_rows(rows)
    ordered = sorted(uniq, key=lambda r: (-r.accuracy, r.iteration))
    return ordered[:k]


def render_top_row(row: DbRow) -> str:
    return f"{row.net} {format_accuracy(row.accuracy)} {row.iteration} {format_params(row.params)}"


def render_top_k(rows: list[DbRow], k: int) -> str:
    selected = top_k(rows, k)
    lines = ["Net Accuracy(%) Order Parameters"]
    lines.extend(render_top_row(r) for r in selected)
    if len(selected) < k:
        lines.append(f"note: only {len(selected)} distinct entries (k={k})")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class StageStats:
    epsilon: float
    model_count: int
    mean_accuracy: float
    max_accuracy: float


def stage_stats(rows: list[DbRow]) -> list[StageStats]:
    """Per-epsilon summary, descending epsilon.

    Every selection in the stage counts, including re-selections of an
    already-trained model (which contribute their stored accuracy): the
    curve tracks what the agent chooses, not what it trains.
    """
    groups: dict[float, list[float]] = defaultdict(list)
    for r in rows:
        groups[r.epsilon].append(r.accuracy)
    out = []
    for eps in sorted(groups, reverse=True):
        accs = groups[eps]
        out.append(StageStats(eps, len(accs), sum(accs) / len(accs), max(accs)))
    return out


def emit_stats_csv(stats: list[StageStats]) -> str:
    lines = ["epsilon,model_count,mean_accuracy,max_accuracy"]
    for s in stats:
        lines.append(f"{s.epsilon!r},{s.model_count},{s.mean_accuracy!r},{s.max_accuracy!r}")
    return "\n".join(lines) + "\n"


def parse_stats_csv(text: str) -> list[StageStats]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "epsilon,model_count,mean_accuracy,max_accuracy":
        raise AnalysisError("bad stage stats CSV header")
    out = []
    for ln in lines[1:]:
        eps, n, mean, mx = ln.split(",")
        out.append(StageStats(float(eps), int(n), float(mean), float(mx)))
    return out


def _multiset(net: str) -> tuple[int, ...]:
    return tuple(sorted(decode_net(net, max_depth=10 ** 6).block_codes()))


def _sequence(net: str) -> tuple[int, ...]:
    return decode_net(net, max_depth=10 ** 6).block_codes()


def _distribution(accs: list[float]) -> str:
    if not accs:
        return "entries 0"
    mean = sum(accs) / len(accs)
    return (
        f"entries {len(accs)} mean {mean:.4f} min {min(accs):.4f} max {max(accs):.4f}"
    )


def structural_query(rows: list[DbRow], query: str) -> str:
    """Run one of the replay-database queries:

    * ``contains:B(n)`` — accuracy distribution of nets whose block multiset
      includes the code;
    * ``swap_pairs`` — pairs with equal block multisets but different orders,
      with their accuracy deltas;
    * ``concat_effect`` — grouped accuracy summaries for plain-inception,
      inception-with-concat and residual-with-concat co-occurrence.
    """
    uniq = unique_rows(rows)
    name, _, arg = query.partition(":")
    if name == "contains":
        code = parse_code(arg)
        hits = [r for r in uniq if code in _multiset(r.net)]
        lines = [f"query contains {arg}", _distribution([r.accuracy for r in hits])]
        for r in hits:
            lines.append(f"{r.net} {format_accuracy(r.accuracy)}")
        return "\n".join(lines) + "\n"
    if name == "swap_pairs":
        by_multiset: dict[tuple[int, ...], list[DbRow]] = defaultdict(list)
        for r in uniq:
            by_multiset[_multiset(r.net)].append(r)
        pair_lines = []
        deltas = []
        for group in by_multiset.values():
            if len(group) < 2:
                continue
            for i in range(len(group)):
                for j in range(i + 1, len(group)):
                    a, b = group[i], group[j]
                    if _sequence(a.net) == _sequence(b.net):
                        continue
                    d = abs(a.accuracy - b.accuracy)
                    deltas.append(d)
                    pair_lines.append(f"{a.net} {b.net} delta {d:.4f}")
        header = ["query swap_pairs", f"pairs {len(deltas)}"]
        if deltas:
            header.append(
                f"mean_delta {sum(deltas) / len(deltas):.4f} max_delta {max(deltas):.4f}"
            )
        return "\n".join(header + pair_lines) + "\n"
    if name == "concat_effect":
        groups = (
            ("inception_plain", {5, 6, 7}),
            ("inception_concat", {8, 9, 10, 11}),
            ("residual_concat", {2, 3, 4}),
        )
        lines = ["query concat_effect"]
        for label, codes in groups:
            accs = [r.accuracy for r in uniq if set(_multiset(r.net)) & codes]
            lines.append(f"{label} {_distribution(accs)}")
        return "\n".join(lines) + "\n"
    raise AnalysisError(
        f"unknown query {query!r}; valid queries: {', '.join(VALID_QUERIES)}"
    )
