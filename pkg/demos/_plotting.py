"""Optional plotting shared by the demos; everything works without matplotlib."""

from __future__ import annotations

from pathlib import Path

OUTPUT = Path(__file__).resolve().parent / "output"


def figure(name: str, panels: list[tuple[str, list[tuple[object, object, str]]]]) -> None:
    """Save one row of line plots to ``demos/output/<name>.png`` if matplotlib is present."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("(matplotlib not installed, skipping the figure)")
        return

    fig, axes = plt.subplots(1, len(panels), figsize=(5 * len(panels), 3.6), squeeze=False)
    for ax, (title, lines) in zip(axes[0], panels):
        for x, y, label in lines:
            ax.plot(x, y, label=label, lw=1)
        ax.set_title(title)
        ax.legend(fontsize="small")
    fig.tight_layout()
    OUTPUT.mkdir(exist_ok=True)
    path = OUTPUT / f"{name}.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    print(f"figure written to {path}")
