"""Figure helpers. Everything renders off-screen to files."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 120,
    "savefig.dpi": 150,
}


def figure(width: float = 6.0, height: float | None = None, ncols: int = 1):
    if height is None:
        height = width * (math.sqrt(5) - 1.0) / 2.0
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, ncols, figsize=(width, height), squeeze=False)
    return fig, axes[0]


def save(fig, path) -> None:
    with plt.rc_context(STYLE):
        fig.tight_layout()
        fig.savefig(path)
    plt.close(fig)


def plot_generators(gens: np.ndarray, path, title: str = "cone generators") -> None:
    fig, (ax,) = figure(5.0, 3.5)
    data = np.atleast_2d(gens)
    scale = np.abs(data).max(axis=1, keepdims=True)
    scale[scale == 0] = 1.0
    im = ax.imshow(data / scale, aspect="auto", cmap="RdBu_r", vmin=-1, vmax=1,
                   interpolation="nearest")
    ax.set_xlabel("edge")
    ax.set_ylabel("generator")
    ax.set_xticks(range(data.shape[1]))
    ax.set_xticklabels([str(j + 1) for j in range(data.shape[1])])
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label="normalized amplitude")
    save(fig, path)


def plot_profiles(x: np.ndarray, profiles: np.ndarray, path, certificate=None,
                  title: str = "lifted edge profiles") -> None:
    ncols = 2 if certificate is not None else 1
    fig, axes = figure(6.5 if ncols == 2 else 4.5, 3.0, ncols)
    for j, row in enumerate(profiles):
        axes[0].plot(x, row, label=f"edge {j + 1}")
    axes[0].set_xlabel("x")
    axes[0].set_title(title)
    axes[0].legend(frameon=False)
    if certificate is not None:
        phi = np.ravel(certificate)
        axes[1].bar(np.arange(1, len(phi) + 1), phi, color=["C3" if p > 0 else "C0" for p in phi])
        axes[1].axhline(0, color="k", lw=0.6)
        axes[1].set_xlabel("edge")
        axes[1].set_title("separating functional")
    save(fig, path)


def plot_trajectory(times: np.ndarray, states: list, path) -> None:
    m = states[0].n_edges
    fig, axes = figure(3.0 * m, 3.0, m)
    x = states[0].x
    field = np.array([z.values for z in states])   # (T, M, P)
    vmax = max(float(field.max()), 1e-300)
    for j in range(m):
        im = axes[j].pcolormesh(x, times, field[:, j, :], shading="auto", cmap="viridis",
                                vmin=min(0.0, float(field.min())), vmax=vmax)
        axes[j].set_title(f"edge {j + 1}")
        axes[j].set_xlabel("x")
    axes[0].set_ylabel("t")
    fig.colorbar(im, ax=axes[-1])
    save(fig, path)


def plot_convergence(n_list, errors, path, rate: float | None = -0.5) -> None:
    fig, (ax,) = figure(4.0, 3.0)
    n = np.asarray(n_list, dtype=float)
    ax.loglog(n, errors, "o-", label="sup error")
    if rate is not None:
        ax.loglog(n, errors[0] * (n / n[0]) ** rate, "k--", lw=0.8, label=f"slope {rate:g}")
    ax.set_xlabel("n")
    ax.set_ylabel("sup |M_n f - f|")
    ax.legend(frameon=False)
    save(fig, path)
