"""Report writers: delimited outputs, counterfactual dumps, and rendered
feature-frequency figures. All files are written atomically
(write-then-rename) so interrupted runs never leave half-written outputs."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .market import NEGATIVE, POSITIVE, RevenueReport
from .tabular import valuable_features


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def write_records(path, report: RevenueReport) -> None:
    rows = [
        (
            r.instance_id,
            r.valence,
            ";".join(r.features) if r.cf_found else "",
            r.tier or "",
            f"{r.expected_revenue:.6f}",
            int(r.spam_fallback),
        )
        for r in report.records
    ]
    write_csv(path, ("instance_id", "valence", "features", "tier", "expected_revenue", "spam_fallback"), rows)


def write_histogram(path, histogram: dict) -> None:
    """Plot-ready two-column output: feature, count (descending count)."""
    rows = sorted(histogram.items(), key=lambda kv: (-kv[1], kv[0]))
    write_csv(path, ("feature", "count"), rows)


def write_cf_dump(path, instances, decisions, cf_lists, schema) -> None:
    base_values = [inst.value_map(schema) for inst in instances]
    rows = []
    for inst, decision, cfs, base in zip(instances, decisions, cf_lists, base_values):
        if not cfs:
            rows.append((inst.id, decision.verdict, "", "", "", ""))
            continue
        for rank, cf in enumerate(cfs):
            changed = ";".join(
                f"{name}:{base[name]}->{cf.changes[name]}" for name in sorted(cf.changes)
            )
            rows.append(
                (inst.id, decision.verdict, rank, changed, f"{cf.distance:.6f}", int(cf.irreducible))
            )
    write_csv(path, ("instance_id", "verdict", "rank", "changes", "distance", "irreducible"), rows)


def plot_feature_frequency(report: RevenueReport, schema, path) -> None:
    """Two-panel bar chart of explanation feature counts, accepted (left)
    and rejected (right); valuable-tier features drawn darker."""
    valuable = set(valuable_features(schema))
    fig, axes = plt.subplots(1, 2, figsize=(11, 4), sharey=False)
    for ax, valence, title in (
        (axes[0], POSITIVE, "accepted applicants"),
        (axes[1], NEGATIVE, "rejected applicants"),
    ):
        hist = report.histogram.get(valence, {})
        items = sorted(hist.items(), key=lambda kv: (-kv[1], kv[0]))
        names = [k for k, _ in items]
        counts = [v for _, v in items]
        colors = ["#1f4e79" if n in valuable else "#9dc3e6" for n in names]
        ax.bar(range(len(names)), counts, color=colors)
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=75, fontsize=7)
        ax.set_title(f"{report.strategy}: {title}")
        ax.set_ylabel("explanations containing feature")
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def fmt_money(amount: float) -> str:
    if abs(amount) >= 1e6:
        return f"${amount / 1e6:.3f}M"
    if abs(amount) >= 1e3:
        return f"${amount / 1e3:.0f}k"
    return f"${amount:.2f}"


def strategy_row(report: RevenueReport) -> str:
    pct = "" if report.pct_increase is None else f"  {report.pct_increase:+.0f}%"
    return (
        f"{report.strategy:<18} accepted: {fmt_money(report.extrapolated_accepted):>10}  "
        f"rejected: {fmt_money(report.extrapolated_rejected):>10}  "
        f"total: {fmt_money(report.extrapolated_total):>10}{pct}"
    )
