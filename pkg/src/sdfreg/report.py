"""Render optimizer traces as figures next to the delimited trace output."""

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_trace_csv(path):
    """Load trace rows written by OptimizerTrace.to_csv as a list of dicts."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.append(
                {
                    "stage": int(row["stage"]),
                    "iter": int(row["iter"]),
                    "energy": float(row["energy"]),
                    "grad_norm": float(row["grad_norm"]),
                    "alpha": float(row["alpha"]),
                    "dx_norm": float(row["dx_norm"]),
                    "event": row["event"],
                }
            )
    return rows


def render_trace_figure(rows, out_path, title=None):
    """Energy and step-size curves over accepted steps, with stage boundaries."""
    accepted = [r for r in rows if r["alpha"] > 0.0]
    if not accepted:
        accepted = rows
    steps = range(1, len(accepted) + 1)
    energies = [r["energy"] for r in accepted]
    dx = [r["dx_norm"] for r in accepted]
    grad = [r["grad_norm"] for r in accepted]

    fig, (ax_e, ax_s) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax_e.plot(steps, energies, color="tab:blue", lw=1.2)
    ax_e.set_yscale("log")
    ax_e.set_ylabel("energy")
    if title:
        ax_e.set_title(title)

    boundaries = [
        i for i in range(1, len(accepted)) if accepted[i]["stage"] != accepted[i - 1]["stage"]
    ]
    for ax in (ax_e, ax_s):
        for b in boundaries:
            ax.axvline(b + 0.5, color="0.8", lw=0.8, zorder=0)

    ax_s.plot(steps, dx, color="tab:orange", lw=1.0, label="|dx|")
    ax_s.plot(steps, grad, color="tab:green", lw=1.0, label="|grad_z|")
    ax_s.set_yscale("log")
    ax_s.set_xlabel("accepted step")
    ax_s.legend(loc="best", frameon=False)

    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path
