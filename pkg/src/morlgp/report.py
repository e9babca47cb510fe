"""CSV/JSON report emission with atomic file writes."""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np


def atomic_write_text(path: str, text: str) -> None:
    """Write via temp file + rename so a failed run leaves no partial file."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_table(reports) -> str:
    """Table-style CSV: weight,mse,median_sigma with 4-significant-digit
    scientific notation for the metrics."""
    if not reports:
        raise ValueError("cannot emit a table for an empty report list")
    lines = ["weight,mse,median_sigma"]
    for r in reports:
        lines.append(f"{r.weight:g},{r.mse:.3e},{r.median_sigma:.3e}")
    return "\n".join(lines) + "\n"


def parse_table(text: str) -> list[dict]:
    rows = []
    lines = [ln for ln in text.splitlines() if ln.strip()]
    for line in lines[1:]:
        w, mse, sigma = line.split(",")
        rows.append({"weight": float(w), "mse": float(mse),
                     "median_sigma": float(sigma)})
    return rows


def reports_to_json(reports) -> str:
    """Full per-state detail for every evaluation weight."""
    docs = []
    for r in reports:
        docs.append({
            "weight": r.weight,
            "mse": r.mse,
            "median_sigma": r.median_sigma,
            "wall_clock_ms": r.wall_clock_ms,
            "v_actual": r.v_actual.tolist(),
            "v_predicted": r.v_predicted.tolist(),
            "q_actual": r.q_actual.tolist(),
            "q_predicted": r.q_predicted.tolist(),
            "policy_actual": r.policy_actual.tolist(),
        })
    return json.dumps(docs, indent=2)


def grid_to_csv(grid: np.ndarray) -> str:
    """Dense n x m grid as CSV; NaN cells (walls) emit empty fields."""
    lines = []
    for row in np.atleast_2d(grid):
        lines.append(",".join("" if np.isnan(v) else f"{v:.10g}" for v in row))
    return "\n".join(lines) + "\n"


def episode_diffs_csv(reports) -> str:
    lines = ["episode,step,fraction"]
    for r in reports:
        for i, frac in enumerate(r.fractions):
            lines.append(f"{r.episode},{i},{frac:.6e}")
    return "\n".join(lines) + "\n"


def episode_summary_csv(reports) -> str:
    lines = ["episode,q1,median,q3"]
    for r in reports:
        lines.append(f"{r.episode},{r.q1:.6e},{r.median:.6e},{r.q3:.6e}")
    return "\n".join(lines) + "\n"


def episode_reports_to_json(reports) -> str:
    return json.dumps([
        {
            "episode": r.episode,
            "start_state": r.start_state,
            "q1": r.q1,
            "median": r.median,
            "q3": r.q3,
            "fractions": r.fractions.tolist(),
        }
        for r in reports
    ], indent=2)


def bounds_csv(report) -> str:
    lines = ["pair,observed_dv,bound_v,observed_dq,bound_q,passed"]
    for i, p in enumerate(report.pairs):
        lines.append(
            f"{i},{p.observed_dv:.6e},{p.bound_v:.6e},"
            f"{p.observed_dq:.6e},{p.bound_q:.6e},{int(p.passed)}"
        )
    return "\n".join(lines) + "\n"


def bounds_to_json(report) -> str:
    return json.dumps({
        "all_passed": report.all_passed,
        "convexity_violations": report.convexity_violations,
        "pairs": [
            {
                "w": p.w.tolist(),
                "w_prime": p.w_prime.tolist(),
                "observed_dv": p.observed_dv,
                "bound_v": p.bound_v,
                "observed_dq": p.observed_dq,
                "bound_q": p.bound_q,
                "passed": p.passed,
            }
            for p in report.pairs
        ],
    }, indent=2)
