"""PNG figures for scenario reports (non-interactive backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .observables import Trajectory, cesaro_means  # noqa: E402


def plot_trajectory(traj: Trajectory, path, title: str = "") -> None:
    """Centroid orbit, kinetic energy, autocorrelation and norm/boundary diagnostics."""
    t = traj.times
    q = np.array([r.mean_q for r in traj.records])
    c = np.array([r.mean_c for r in traj.records])
    fig, ax = plt.subplots(2, 2, figsize=(10, 8))

    ax[0, 0].plot(q[:, 0], q[:, 1], "o-", ms=3, label="<q>")
    ax[0, 0].plot(c[:, 0], c[:, 1], "s--", ms=2, label="<c>")
    ax[0, 0].set_xlabel("x")
    ax[0, 0].set_ylabel("y")
    ax[0, 0].set_aspect("equal", adjustable="datalim")
    ax[0, 0].legend()
    ax[0, 0].set_title("centroid")

    ax[0, 1].plot(t, traj.column("kinetic"), "o-", ms=3)
    ax[0, 1].set_xlabel("t")
    ax[0, 1].set_ylabel("<H_La>")
    ax[0, 1].set_title("kinetic energy")

    strob = traj.stroboscopic()
    ac = np.abs(strob.column("autocorr").astype(complex))
    n = np.arange(ac.size)
    ax[1, 0].semilogy(n, np.maximum(ac, 1e-300), "o-", ms=3, label="|<psi0, U(nT) psi0>|")
    if ac.size > 1:
        ax[1, 0].semilogy(n[1:], np.maximum(cesaro_means(strob.column("autocorr")), 1e-300), "-", label="Cesàro mean")
    ax[1, 0].set_ylim(1e-16, 2)
    ax[1, 0].set_xlabel("n")
    ax[1, 0].legend()
    ax[1, 0].set_title("autocorrelation")

    norm = traj.column("norm")
    ax[1, 1].semilogy(t, np.abs(norm - norm[0]) + 1e-17, label="|norm drift|")
    ax[1, 1].semilogy(t, traj.column("boundary_mass") + 1e-300, label="boundary mass")
    ax[1, 1].set_xlabel("t")
    ax[1, 1].legend()
    ax[1, 1].set_title("numerical health")

    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def plot_scan(results, path) -> None:
    """Sojourn scan: ``<z> f_av`` supremum against radius."""
    r = np.array([x[0] for x in results])
    v = np.array([x[1] for x in results])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(r, v, "o-")
    ax.set_xlabel("|z|")
    ax.set_ylabel("sup <z> |f_av|")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
