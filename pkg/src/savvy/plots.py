"""Static SVG renderings of agreement tables, written next to the CSV output."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

# fixed hash salt and no embedded date: rerunning the pipeline must produce
# byte-identical figure files
plt.rcParams["svg.hashsalt"] = "savvy"


def render_bland_altman(tables, path, title=""):
    """One panel per Bland-Altman table: benchmark on x, difference on y."""
    tables = [t for t in tables if t.x_benchmark.size]
    if not tables:
        return False
    fig, axes = plt.subplots(1, len(tables), figsize=(4.4 * len(tables), 3.5),
                             squeeze=False)
    for ax, t in zip(axes[0], tables):
        ax.scatter(t.x_benchmark, t.y_difference, s=18, alpha=0.7, edgecolor="none")
        ax.axhline(0.0, color="black", lw=0.6)
        ax.axhline(t.mean_difference, color="firebrick", lw=1.2, label="mean difference")
        ax.axhline(t.loa_low, color="gray", lw=1.0, ls="--", label="limits of agreement")
        ax.axhline(t.loa_high, color="gray", lw=1.0, ls="--")
        ax.set_xlabel("benchmark")
        ax.set_ylabel("comparator - benchmark")
        ax.set_title(t.measure)
    axes[0][0].legend(loc="best", fontsize=8)
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return True
