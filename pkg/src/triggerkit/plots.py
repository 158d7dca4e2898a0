"""Static plot exports for reports.  Convenience only, no contract."""

from __future__ import annotations


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def accuracy_bars(rows: list[dict], path: str) -> None:
    """Bar chart of accuracy per (model, split) row."""
    plt = _pyplot()
    labels = [f"{r['model']}\n{r['split']}" for r in rows]
    values = [r["accuracy"] for r in rows]
    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(rows)), 4))
    ax.bar(range(len(rows)), values, color="steelblue")
    ax.set_xticks(range(len(rows)), labels, fontsize=8)
    ax.set_ylabel("top-1 accuracy (%)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def loss_curves(curve_rows: list[dict], path: str) -> None:
    plt = _pyplot()
    fig, ax1 = plt.subplots(figsize=(6, 4))
    epochs = [r["epoch"] for r in curve_rows]
    ax1.plot(epochs, [r["train_loss"] for r in curve_rows], "b-", label="train loss")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("train loss", color="b")
    ax2 = ax1.twinx()
    ax2.plot(epochs, [r["val_accuracy"] for r in curve_rows], "r-", label="val accuracy")
    ax2.set_ylabel("val accuracy (%)", color="r")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def position_histogram(trigger_counts: dict[int, int], target_counts: dict[int, int],
                       path: str) -> None:
    """Histogram of trigger/target positions along the event order."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    max_idx = max(list(trigger_counts) + list(target_counts) + [0])
    xs = list(range(max_idx + 1))
    ax.bar([x - 0.2 for x in xs], [trigger_counts.get(x, 0) for x in xs],
           width=0.4, label="trigger", color="darkorange")
    ax.bar([x + 0.2 for x in xs], [target_counts.get(x, 0) for x in xs],
           width=0.4, label="target", color="steelblue")
    ax.set_xlabel("event position in temporal order")
    ax.set_ylabel("count")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
