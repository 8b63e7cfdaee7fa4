"""Optional PNG figures next to the CSV/JSON reports.

matplotlib is imported lazily so the core package never depends on it.
"""

import numpy as np


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise RuntimeError("--plot needs matplotlib (pip install 'artifact[plot]')") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def leaf_scatter(rows, path):
    """log|h1| against log|h2| for every sampled point, coloured by |x|."""
    plt = _pyplot()
    x = np.array([r[0] for r in rows])
    h1 = np.array([r[3] for r in rows])
    h2 = np.array([r[4] for r in rows])
    fig, ax = plt.subplots(figsize=(5, 4.5))
    sc = ax.scatter(np.log10(np.abs(h1)), np.log10(np.abs(h2)), c=np.abs(x), s=6, cmap="viridis")
    fig.colorbar(sc, ax=ax, label="|x|")
    ax.set_xlabel(r"$\log_{10}|h_1|$")
    ax.set_ylabel(r"$\log_{10}|h_2|$")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def stokes_bars(data, path):
    """|Psi_{j,side,n}(0)| against n, one panel per side."""
    plt = _pyplot()
    fig, axes = plt.subplots(1, len(data), figsize=(4.5 * len(data), 3.5), squeeze=False)
    for ax, (side, d) in zip(axes[0], data.items()):
        for j, marker in ((1, "o"), (2, "s")):
            ns = sorted(n for (jj, n) in d.tables if jj == j)
            vals = [max(abs(d.tables[(j, n)][0]), 1e-17) for n in ns]
            ax.semilogy(ns, vals, marker=marker, ls="-", label=f"j={j}")
        ax.set_title(f"side {side}")
        ax.set_xlabel("n")
        ax.set_ylabel(r"$|\Psi_{j,n}(0)|$")
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
