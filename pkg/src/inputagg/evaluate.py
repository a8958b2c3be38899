"""Open-set rank-1 identification.

Scores come from the model's softmax restricted to the classes enrolled in
the gallery; the top class's posterior is the score. A probe whose class is
not enrolled counts as correct only if it is rejected, either by falling
below the threshold or (``mode="unknown_class"``) by landing on the
explicit unknown label.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .train import predict_logits, softmax

MODES = ("threshold", "unknown_class")


def _enrolled_columns(model, gallery, unknown_label=None):
    enrolled = {v.label for v in gallery}
    cols = [i for i, lab in enumerate(model.labels) if lab in enrolled or lab == unknown_label]
    if not cols:
        raise ValueError("no gallery class is known to the model")
    return np.array(cols)


def score_videos(model, videos, columns, workers=1):
    """Top label and its posterior for each video, in input order."""
    def one(v):
        p = softmax(predict_logits(model, v.frames)[columns])
        k = int(np.argmax(p))
        return model.labels[columns[k]], float(p[k])

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(one, videos))
    return [one(v) for v in videos]


def calibrate_threshold(model, gallery, quantile=0.05, workers=1):
    """Threshold at the given quantile of top-class scores over gallery videos."""
    cols = _enrolled_columns(model, gallery)
    scores = [s for _, s in score_videos(model, gallery, cols, workers)]
    return float(np.quantile(scores, quantile, method="lower"))


def evaluate_open_set(model, gallery, probe, reject_threshold, mode="threshold",
                      unknown_label="unknown", workers=1):
    """Rank-1 open-set identification metrics.

    Returns a dict with ``accuracy`` over all probes, ``known_accuracy`` over
    probes whose class is enrolled, ``false_accept_rate`` over the remaining
    probes, and the probe counts.
    """
    if not probe:
        raise ValueError("probe set is empty")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    enrolled = {v.label for v in gallery}
    cols = _enrolled_columns(model, gallery, unknown_label if mode == "unknown_class" else None)
    scored = score_videos(model, probe, cols, workers)
    correct = known_hits = false_accepts = 0
    n_known = n_unknown = 0
    for video, (top, score) in zip(probe, scored):
        rejected = score < reject_threshold or (mode == "unknown_class" and top == unknown_label)
        if video.label in enrolled:
            n_known += 1
            hit = not rejected and top == video.label
            known_hits += hit
            correct += hit
        else:
            n_unknown += 1
            false_accepts += not rejected
            correct += rejected
    return {
        "accuracy": correct / len(probe),
        "known_accuracy": known_hits / n_known if n_known else float("nan"),
        "false_accept_rate": false_accepts / n_unknown if n_unknown else float("nan"),
        "n_probe": len(probe),
        "n_known": n_known,
        "n_unknown": n_unknown,
        "threshold": float(reject_threshold),
        "mode": mode,
    }
