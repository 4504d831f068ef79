"""Report rendering: aligned text tables, delimited output, and matplotlib
figures saved alongside them."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def format_report_table(report):
    """Per-class rows with Precision/Recall/F1 columns, overall row last."""
    classes = sorted(report.per_class)
    rows = [("Classes", "Precision (%)", "Recall (%)", "F1 (%)", "Support")]
    for cls in classes:
        prf = report.per_class[cls]
        rows.append((cls, f"{prf.precision:.2f}", f"{prf.recall:.2f}",
                     f"{prf.f1:.2f}", str(report.support.get(cls, 0))))
    o = report.overall
    rows.append(("Overall", f"{o.precision:.2f}", f"{o.recall:.2f}", f"{o.f1:.2f}",
                 str(sum(report.support.values()))))
    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0 or i == len(rows) - 2:
            lines.append("-" * (sum(widths) + 8))
    lines.append(f"Surface-form F1: {report.surface_form_f1:.2f}")
    return "\n".join(lines)


def report_tsv(report):
    lines = ["class\tprecision\trecall\tf1\tsupport"]
    for cls in sorted(report.per_class):
        prf = report.per_class[cls]
        lines.append(f"{cls}\t{prf.precision:.4f}\t{prf.recall:.4f}\t{prf.f1:.4f}"
                     f"\t{report.support.get(cls, 0)}")
    o = report.overall
    lines.append(f"OVERALL\t{o.precision:.4f}\t{o.recall:.4f}\t{o.f1:.4f}"
                 f"\t{sum(report.support.values())}")
    lines.append(f"SURFACE_FORM\t\t\t{report.surface_form_f1:.4f}\t")
    return "\n".join(lines) + "\n"


def save_class_figure(report, path):
    """Grouped per-class P/R/F1 bar chart."""
    classes = sorted(report.per_class)
    if not classes:
        classes = []
    fig, ax = plt.subplots(figsize=(max(6, 1.4 * len(classes) + 2), 4))
    x = range(len(classes))
    width = 0.27
    for off, (attr, label) in enumerate(
        (("precision", "Precision"), ("recall", "Recall"), ("f1", "F1"))
    ):
        vals = [getattr(report.per_class[c], attr) for c in classes]
        ax.bar([i + (off - 1) * width for i in x], vals, width, label=label)
    ax.axhline(report.overall.f1, color="gray", linestyle="--", linewidth=1,
               label=f"Overall F1 = {report.overall.f1:.1f}")
    ax.set_xticks(list(x))
    ax.set_xticklabels(classes, rotation=20, ha="right")
    ax.set_ylabel("%")
    ax.set_ylim(0, 105)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_training_figure(log, path):
    """Train loss and dev F1 per epoch on twin axes."""
    epochs = [r.epoch for r in log.epochs]
    fig, ax1 = plt.subplots(figsize=(7, 4))
    ax1.plot(epochs, [r.train_loss for r in log.epochs], color="tab:blue",
             marker="o", markersize=3, label="train loss")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("train loss", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(epochs, [r.dev_f1 for r in log.epochs], color="tab:orange",
             marker="s", markersize=3, label="dev F1")
    ax2.set_ylabel("dev entity F1 (%)", color="tab:orange")
    ax2.set_ylim(0, 105)
    if log.best_epoch > 0:
        ax1.axvline(log.best_epoch, color="gray", linestyle=":", linewidth=1)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def ablation_tsv(rows):
    lines = ["component\tmean_f1\tdelta\truns"]
    for row in rows:
        runs = ",".join(f"{v:.4f}" for v in row.f1_per_rep)
        lines.append(f"{row.name}\t{row.mean_f1:.4f}\t{row.delta:+.4f}\t{runs}")
    return "\n".join(lines) + "\n"


def format_ablation_table(rows):
    header = ("Model", "F1", "Delta")
    body = [(r.name, f"{r.mean_f1:.2f}", f"{r.delta:+.2f}" if r.name != "base" else "")
            for r in rows]
    widths = [max(len(header[i]), *(len(b[i]) for b in body)) for i in range(3)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
             "-" * (sum(widths) + 4)]
    for b in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(b, widths)).rstrip())
    return "\n".join(lines)


def save_ablation_figure(rows, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    names = [r.name for r in rows]
    ax.barh(range(len(rows)), [r.mean_f1 for r in rows], color="tab:blue")
    ax.set_yticks(range(len(rows)))
    ax.set_yticklabels(names)
    ax.invert_yaxis()
    ax.set_xlabel("mean dev F1 (%)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
