"""SP and P evaluation of a trained model on both dataset segments."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import Dataset
from .metrics import MetricsReport, metrics_report
from .narx import NarxModel, predict_sp, simulate_p
from .train import split


@dataclass(frozen=True)
class Evaluation:
    """Per-sample predictions over the whole record plus metric reports.

    Predictions are computed per segment, so each segment starts with its
    own NaN delay window.  ``reports`` has keys ``"sp"`` and ``"p"``.
    """

    y: np.ndarray
    y_sp: np.ndarray
    y_p: np.ndarray
    segment: np.ndarray
    reports: dict[str, MetricsReport]


def evaluate(model: NarxModel, data: Dataset, free_run: bool = True) -> Evaluation:
    w = model.delays.window
    est, val = split(data, w)
    sp = [predict_sp(model, seg.u, seg.y) for seg in (est, val)]
    reports = {"sp": metrics_report(est.y, sp[0], val.y, sp[1], model.n_params)}
    if free_run:
        p = [simulate_p(model, seg.u, seg.y[:w]) for seg in (est, val)]
        # the copied initial window is not a prediction
        for arr in p:
            arr[:w] = np.nan
        reports["p"] = metrics_report(est.y, p[0], val.y, p[1], model.n_params)
    else:
        p = [np.full(len(seg.y), np.nan) for seg in (est, val)]
    segment = np.array(["est"] * len(est.y) + ["val"] * len(val.y))
    return Evaluation(
        y=data.y.samples,
        y_sp=np.concatenate(sp),
        y_p=np.concatenate(p),
        segment=segment,
        reports=reports,
    )
