"""Log-log convergence figures rendered next to the CSV output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_STYLES = {"L2": ("o-", "tab:blue"), "H1": ("s-", "tab:orange"), "H2": ("^-", "tab:green")}


def render_report(report, path, title="", norms=("L2", "H1", "H2")):
    """One log-log panel of error against mesh size, with fitted orders in the
    legend and an h^(1/2) guide line."""
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    hs = report.column("h")
    for norm in norms:
        errs = report.column(f"err{norm}")
        if not (errs > 0).any():
            continue
        marker, color = _STYLES[norm]
        label = norm
        if len(hs) >= 2:
            label += f" (fit {report.eoc_fit(norm):.2f})"
        ax.loglog(hs, errs, marker, color=color, label=label, ms=4)
    ref = report.column("errH2")
    if (ref > 0).any():
        scale = ref[0] / hs[0] ** 0.5
        ax.loglog(hs, scale * hs**0.5, "k--", lw=0.8, label=r"$h^{1/2}$")
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
