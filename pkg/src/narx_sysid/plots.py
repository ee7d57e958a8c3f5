"""SVG figures for a run bundle."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import ResidualACF, correlation  # noqa: E402

STYLE = {
    "figure.figsize": (7.0, 4.2),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.0,
    "legend.fontsize": 8,
    "svg.hashsalt": "narx-sysid",
    "svg.fonttype": "path",
}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_overlay(path: Path, t, y, y_sp, y_p, segment) -> Path:
    """Measured vs predicted rate, one panel per segment."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(2, 1, figsize=(7.0, 5.5))
        for ax, seg, title in zip(axes, ("est", "val"), ("Estimation", "Validation")):
            m = segment == seg
            ax.plot(t[m], y[m], color="k", label="measured")
            ax.plot(t[m], y_sp[m], color="tab:red", ls="--", label="one-step (SP)")
            if np.any(np.isfinite(y_p[m])):
                ax.plot(t[m], y_p[m], color="tab:blue", ls=":", label="free run (P)")
            ax.set_title(f"{title} data")
            ax.set_ylabel("rate [rad/s]")
            ax.legend(loc="upper right")
        axes[-1].set_xlabel("time [s]")
        fig.tight_layout()
        return _save(fig, path)


def plot_training_curve(path: Path, epochs, train_mse, val_mse, best_epoch: int) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.semilogy(epochs, train_mse, color="tab:blue", label="train")
        ax.semilogy(epochs, val_mse, color="tab:green", label="validation")
        best = val_mse[best_epoch]
        ax.axvline(best_epoch, color="tab:green", ls=":", lw=0.8)
        ax.plot([best_epoch], [best], "o", mfc="none", mec="tab:green", ms=9,
                label=f"best: epoch {best_epoch}, MSE {best:.6g}")
        ax.set_xlabel("epoch")
        ax.set_ylabel("MSE")
        ax.legend()
        fig.tight_layout()
        return _save(fig, path)


def plot_scatter(path: Path, y, y_hat, segment) -> dict[str, float]:
    """Prediction-vs-target scatter with least-squares line; returns R per segment."""
    r_values = {}
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(7.5, 3.8))
        for ax, seg, title in zip(axes, ("est", "val"), ("Training", "Validation")):
            m = (segment == seg) & np.isfinite(y_hat)
            tgt, out = y[m], y_hat[m]
            r = correlation(tgt, out)
            r_values[seg] = r
            slope, icpt = np.polyfit(tgt, out, 1)
            lo, hi = float(min(tgt.min(), out.min())), float(max(tgt.max(), out.max()))
            ax.plot(tgt, out, ".", ms=2, color="tab:blue", alpha=0.5, label="data")
            ax.plot([lo, hi], [lo, hi], color="0.5", ls=":", label="Y = T")
            ax.plot([lo, hi], [slope * lo + icpt, slope * hi + icpt], color="tab:red", label="fit")
            ax.set_title(f"{title}: R = {r:.6f}")
            ax.set_xlabel("target")
            ax.set_ylabel(f"output ~= {slope:.3g}*target + {icpt:.2g}")
            ax.legend(loc="upper left")
        fig.tight_layout()
        _save(fig, path)
    return r_values


def plot_residual_acf(path: Path, acf: ResidualACF) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.vlines(acf.lags, 0, acf.values, color="tab:blue")
        ax.plot(acf.lags, acf.values, "o", ms=3, color="tab:blue")
        ax.axhspan(-acf.band, acf.band, color="tab:red", alpha=0.15, label="95% whiteness band")
        ax.axhline(0, color="k", lw=0.6)
        ax.set_xlabel("lag [samples]")
        ax.set_ylabel("residual autocorrelation")
        ax.legend()
        fig.tight_layout()
        return _save(fig, path)
