"""Report emission: aligned text table, JSON-lines records, optional CSV.

Summary cells are mean over seeds with the sample standard deviation; a
Welch t-test p-value comparing the plain and message-passing variants is
reported per cell group for information only (nothing gates on it).
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np
from scipy import stats as sp_stats


def group_records(records: list) -> dict:
    """(variant, f_tr, f_te, mode) -> list of per-seed values."""
    groups: dict = {}
    for rec in records:
        key = (rec["variant"], rec["f_tr"], rec["f_te"], rec["mode"])
        groups.setdefault(key, []).append(rec["value"])
    return groups


def summarize(records: list) -> list:
    """One summary row per cell group: mean, sample std, seed count."""
    rows = []
    for (variant, f_tr, f_te, mode), values in sorted(group_records(records).items()):
        arr = np.asarray(values)
        rows.append({
            "variant": variant, "f_tr": f_tr, "f_te": f_te, "mode": mode,
            "mean": float(arr.mean()),
            "std": float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
            "seeds": int(arr.size),
        })
    return rows


def welch_pvalues(records: list, against: str = "gru", candidate: str = "gru-cm") -> list:
    """Welch's t-test per (f_tr, f_te, mode) between two variants' per-seed
    values; informational only."""
    groups = group_records(records)
    out = []
    for (variant, f_tr, f_te, mode), values in sorted(groups.items()):
        if variant != against:
            continue
        other = groups.get((candidate, f_tr, f_te, mode))
        if not other or len(values) < 2 or len(other) < 2:
            continue
        result = sp_stats.ttest_ind(values, other, equal_var=False)
        out.append({"f_tr": f_tr, "f_te": f_te, "mode": mode,
                    "baseline": against, "candidate": candidate,
                    "p_value": float(result.pvalue)})
    return out


def _fmt_cell(summary_index, variant, f_tr, f_te, mode) -> str:
    row = summary_index.get((variant, f_tr, f_te, mode))
    if row is None:
        return "-"
    return f"{row['mean']:.2f}±{row['std']:.2f}"


def render_table(report) -> str:
    """Human-readable grid: rows are f_te, column blocks per f_tr holding
    the zero-shot and fine-tune variants, with the all-sensors upper bound
    as its own trailing column."""
    records = report.records
    summary = summarize(records)
    index = {(r["variant"], r["f_tr"], r["f_te"], r["mode"]): r for r in summary}

    f_trs = sorted({r["f_tr"] for r in records if r["variant"] != "gru-a"})
    f_tes = sorted({r["f_te"] for r in records if r["variant"] != "gru-a"})
    modes = [m for m in ("zero-shot", "fine-tune", "overlap-fine-tune", "scratch")
             if any(r["mode"] == m for r in records)]
    variants = [v for v in ("gru", "gru-se", "gru-cm")
                if any(r["variant"] == v for r in records)]
    gru_a = next((r for r in summary if r["variant"] == "gru-a"), None)

    header1 = ["", ""]
    header2 = ["f_te", ""]
    for f_tr in f_trs:
        for mode in modes:
            for v in variants:
                header1.append(f"f_tr={f_tr:g} {mode}")
                header2.append(v)
    if gru_a is not None:
        header1.append("all-sensors")
        header2.append("gru-a")

    body = []
    for f_te in f_tes:
        row = [f"{f_te:g}", ""]
        for f_tr in f_trs:
            for mode in modes:
                for v in variants:
                    row.append(_fmt_cell(index, v, f_tr, f_te, mode))
        if gru_a is not None:
            row.append(f"{gru_a['mean']:.2f}±{gru_a['std']:.2f}")
        body.append(row)

    widths = [max(len(r[i]) for r in [header1, header2] + body)
              for i in range(len(header1))]
    lines = []
    for row in [header1, header2] + body:
        lines.append("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))

    pvals = welch_pvalues(records)
    if pvals:
        lines.append("")
        lines.append("Welch t-test p-values (gru vs gru-cm, informational):")
        for p in pvals:
            lines.append(f"  f_tr={p['f_tr']:g} f_te={p['f_te']:g} {p['mode']}: "
                         f"p={p['p_value']:.4f}")
    lines.append("")
    seeds = sorted({r["seed"] for r in records})
    lines.append(f"seeds: {seeds} | report digest: {report.digest_hex()} | "
                 f"data digest: {report.data_digest:016x}")
    if report.failures:
        lines.append(f"FAILED CELLS ({len(report.failures)}):")
        for f in report.failures:
            lines.append(f"  {f['cell']}: {f['error']}")
    return "\n".join(lines)


def records_jsonl(records: list) -> str:
    buf = io.StringIO()
    for rec in records:
        buf.write(json.dumps(rec, sort_keys=True) + "\n")
    return buf.getvalue()


def write_report(report, outdir, write_csv: bool = False) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.jsonl").write_text(records_jsonl(report.records))
    (outdir / "report.txt").write_text(render_table(report) + "\n")
    (outdir / "summary.json").write_text(json.dumps({
        "summary": summarize(report.records),
        "welch_pvalues": welch_pvalues(report.records),
        "config": report.config,
        "report_digest": report.digest_hex(),
        "data_digest": f"{report.data_digest:016x}",
        "failures": report.failures,
    }, indent=2, sort_keys=True))
    if write_csv:
        with open(outdir / "report.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=[
                "dataset", "variant", "f_tr", "f_te", "mode", "seed",
                "metric", "value", "runtime_s"])
            writer.writeheader()
            for rec in report.records:
                writer.writerow(rec)
