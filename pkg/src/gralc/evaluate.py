"""Ranking and structural-coverage metrics, timing, and report rendering.

Relevance is source-document-id match: a retrieved chunk is relevant to a
query when its chunk came from the query's gold document (length-condition
suffixes are stripped before comparison). Section coverage counts distinct
primary-section labels among the top-k chunks and is reported raw, with a
normalized column (divided by the source document's section count) as a
secondary view.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .bench import BenchmarkQuestion
from .errors import DisjointRows, MissingGold, UnsupportedFormat
from .retrieval import RetrievalResult


def base_doc_id(doc_id: str) -> str:
    return doc_id.split("#", 1)[0]


def _first_relevant_rank(result: RetrievalResult, gold_doc: str) -> int | None:
    gold = base_doc_id(gold_doc)
    for rank, entry in enumerate(result.entries, 1):
        if base_doc_id(entry.doc_id) == gold:
            return rank
    return None


def mrr(results: Sequence[RetrievalResult], gold: Mapping[str, str]) -> float:
    """Mean over queries of 1/rank of the first chunk from the gold document."""
    if not results:
        return 0.0
    terms = []
    for res in results:
        if res.query_id not in gold:
            raise MissingGold(f"no gold document for query {res.query_id!r}")
        rank = _first_relevant_rank(res, gold[res.query_id])
        terms.append(0.0 if rank is None else 1.0 / rank)
    return math.fsum(terms) / len(results)


def recall_at_k(results: Sequence[RetrievalResult], gold: Mapping[str, str],
                k: int) -> float:
    """Fraction of queries whose top-k contains a gold-document chunk."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not results:
        return 0.0
    hits = 0
    for res in results:
        if res.query_id not in gold:
            raise MissingGold(f"no gold document for query {res.query_id!r}")
        rank = _first_relevant_rank(
            RetrievalResult(res.query_id, k, res.entries[:k]), gold[res.query_id])
        hits += rank is not None
    return hits / len(results)


def sec_cov_at_k(results: Sequence[RetrievalResult], k: int) -> float:
    """Average number of distinct primary-section labels in the top-k."""
    if not results:
        return 0.0
    counts = [len({e.section for e in res.entries[:k]}) for res in results]
    return math.fsum(counts) / len(results)


def sec_cov_at_k_normalized(results: Sequence[RetrievalResult], k: int,
                            gold: Mapping[str, str],
                            doc_sections: Mapping[str, int]) -> float:
    """Secondary view: per-query coverage divided by the source document's
    section count."""
    if not results:
        return 0.0
    vals = []
    for res in results:
        total = doc_sections.get(base_doc_id(gold.get(res.query_id, "")), 0)
        distinct = len({e.section for e in res.entries[:k]})
        vals.append(distinct / total if total else 0.0)
    return math.fsum(vals) / len(results)


def cs_recall_at_k(results: Sequence[RetrievalResult],
                   questions: Sequence[BenchmarkQuestion], k: int) -> float:
    """Fraction of questions whose top-k covers every required section kind."""
    if not questions:
        return 0.0
    by_id = {res.query_id: res for res in results}
    hits = 0
    for q in questions:
        res = by_id.get(q.question_id)
        if res is None:
            continue
        kinds = {e.kind for e in res.entries[:k]}
        if all(req in kinds for req in q.required_sections):
            hits += 1
    return hits / len(questions)


def time_indexing(strategy: str, docs, settings, provider) -> dict:
    """Wall-clock the full chunk+embed+index pipeline for one strategy."""
    from . import pipeline  # late import: pipeline depends on this module

    start = time.perf_counter()
    index = pipeline.index_corpus(docs, strategy, settings, provider)
    elapsed = time.perf_counter() - start
    return {"strategy": strategy, "chunk_count": len(index),
            "wall_seconds": elapsed}


# ---------------------------------------------------------------------------
# Report assembly and rendering


@dataclass
class EvalReport:
    rows: list[dict] = field(default_factory=list)  # strategy/condition metrics
    efficiency: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def columns(self) -> list[str]:
        cols: list[str] = []
        for row in self.rows:
            for key in row:
                if key not in cols:
                    cols.append(key)
        return cols


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def emit_report(report: EvalReport, fmt: str) -> bytes:
    """Render the report as csv, json, md, or long-format plotdata csv."""
    if fmt == "json":
        doc = {"rows": report.rows, "efficiency": report.efficiency,
               "metadata": report.metadata}
        return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        cols = report.columns()
        writer.writerow(cols)
        for row in report.rows:
            writer.writerow([_fmt(row.get(c, "")) for c in cols])
        return buf.getvalue().encode("utf-8")
    if fmt == "md":
        cols = report.columns()
        lines = ["| " + " | ".join(cols) + " |",
                 "|" + "|".join("---" for _ in cols) + "|"]
        for row in report.rows:
            lines.append("| " + " | ".join(_fmt(row.get(c, "")) for c in cols) + " |")
        if report.efficiency:
            lines.append("")
            lines.append("| strategy | condition | chunk_count | wall_seconds |")
            lines.append("|---|---|---|---|")
            for row in report.efficiency:
                lines.append("| {strategy} | {condition} | {chunk_count} | {wall:.3f} |".format(
                    strategy=row.get("strategy", ""), condition=row.get("condition", ""),
                    chunk_count=row.get("chunk_count", ""),
                    wall=row.get("wall_seconds", 0.0)))
        return ("\n".join(lines) + "\n").encode("utf-8")
    if fmt == "plotdata":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["strategy", "condition", "metric", "value"])
        for row in report.rows:
            for key, value in row.items():
                if key in ("strategy", "condition") or not isinstance(value, (int, float)):
                    continue
                writer.writerow([row.get("strategy", ""), row.get("condition", ""),
                                 key, _fmt(float(value))])
        return buf.getvalue().encode("utf-8")
    raise UnsupportedFormat(f"unknown report format {fmt!r}")


def report_from_json(data: bytes | str) -> EvalReport:
    doc = json.loads(data)
    return EvalReport(rows=doc.get("rows", []),
                      efficiency=doc.get("efficiency", []),
                      metadata=doc.get("metadata", {}))


def compare_reports(reports: Sequence[EvalReport]) -> tuple[str, list[str]]:
    """Per-metric deltas and ratios between the first report and the rest.

    Rows align on (strategy, condition); metric columns missing from either
    side are skipped with a warning.
    """
    if len(reports) < 2:
        raise ValueError("need at least two reports to compare")
    warnings: list[str] = []
    base = {(r.get("strategy"), r.get("condition")): r for r in reports[0].rows}
    lines = []
    any_overlap = False
    for idx, other in enumerate(reports[1:], 1):
        rows = {(r.get("strategy"), r.get("condition")): r for r in other.rows}
        shared = [key for key in base if key in rows]
        if not shared:
            continue
        any_overlap = True
        lines.append(f"## report[0] vs report[{idx}]")
        lines.append("")
        lines.append("| strategy | condition | metric | a | b | delta | ratio |")
        lines.append("|---|---|---|---|---|---|---|")
        for key in shared:
            a_row, b_row = base[key], rows[key]
            metrics = [c for c in a_row
                       if c not in ("strategy", "condition")
                       and isinstance(a_row[c], (int, float))]
            for metric in metrics:
                if metric not in b_row:
                    warnings.append(f"column {metric!r} missing in report[{idx}]; skipped")
                    continue
                a, b = float(a_row[metric]), float(b_row[metric])
                ratio = "inf" if a == 0 and b != 0 else (f"{b / a:.4f}" if a != 0 else "1.0000")
                lines.append(
                    f"| {key[0]} | {key[1]} | {metric} | {a:.4f} | {b:.4f} "
                    f"| {b - a:+.4f} | {ratio} |")
        lines.append("")
    if not any_overlap:
        raise DisjointRows("reports share no (strategy, condition) rows")
    return "\n".join(lines), warnings
