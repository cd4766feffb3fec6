"""Report emission: per-figure plot-data files plus rendered matplotlib figures.

Each figure gets a CSV (columns x, y, yerr, bound_rhs) usable by any plotting
tool, and a PNG rendered next to it.
"""

from __future__ import annotations

import json
import math
import os

from .jsonfmt import dumps17

AXES = ("t", "delta", "n", "l", "lambda", "p")


def _load_summary(out_dir: str) -> dict:
    path = os.path.join(out_dir, "summary.json")
    if not os.path.exists(path):
        raise FileNotFoundError(f"no summary.json in {out_dir}; run `stabsim sweep` first")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _axis_value(entry: dict, axis: str):
    val = entry.get(axis)
    if val == "inf":
        return math.inf
    return val


def _varying_axes(points: list[dict]) -> list[str]:
    out = []
    for axis in AXES:
        vals = {repr(_axis_value(p, axis)) for p in points}
        if len(vals) > 1:
            out.append(axis)
    return out


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    xf = float(x)
    if math.isinf(xf):
        return "inf"
    return format(xf, ".17g")


def emit_report(out_dir: str, measure: str = "mean", figures: bool = True) -> list[str]:
    """Write fig_<axis>[__series].csv (+ .png) for every varying grid axis.

    measure: "mean" plots the Monte Carlo mean of delta_rho with 2-stderr error
    bars; "max" plots the per-point maximum (worst-case audits); "max_wc" the
    maximum recorded worst-case Delta.
    """
    summary = _load_summary(out_dir)
    points = summary["points"]
    varying = _varying_axes(points) or ["t"]
    written: list[str] = []
    for axis in varying:
        others = [a for a in varying if a != axis]
        groups: dict[tuple, list[dict]] = {}
        for entry in points:
            key = tuple((a, _fmt(_axis_value(entry, a))) for a in others)
            groups.setdefault(key, []).append(entry)
        for key, entries in sorted(groups.items()):
            label = "__".join(f"{a}={v}" for a, v in key)
            stem = f"fig_{axis}" + (f"__{label}" if label else "")
            rows = []
            for entry in sorted(entries, key=lambda e: _axis_value(e, axis) if _axis_value(e, axis) is not None else 0):
                x = _axis_value(entry, axis)
                if measure == "max":
                    y, yerr = entry["max"], 0.0
                elif measure == "max_wc":
                    y, yerr = entry.get("max_delta_wc"), 0.0
                else:
                    y, yerr = entry["mean"], 2.0 * entry["stderr"]
                bound_vals = [v for v in (entry.get("bounds") or {}).values() if v is not None]
                rows.append((x, y, yerr, min(bound_vals) if bound_vals else None))
            csv_path = os.path.join(out_dir, stem + ".csv")
            with open(csv_path, "w", encoding="utf-8") as fh:
                fh.write("x,y,yerr,bound_rhs\n")
                for row in rows:
                    fh.write(",".join(_fmt(v) for v in row) + "\n")
            written.append(csv_path)
            if figures:
                written.append(_render_figure(out_dir, stem, axis, measure, rows))
    manifest = os.path.join(out_dir, "report_manifest.json")
    with open(manifest, "w", encoding="utf-8") as fh:
        fh.write(dumps17({"measure": measure, "files": sorted(os.path.basename(w) for w in written)}, indent=2))
    written.append(manifest)
    return written


def _render_figure(out_dir: str, stem: str, axis: str, measure: str, rows) -> str:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = [r[0] for r in rows]
    ys = [r[1] for r in rows]
    yerrs = [r[2] for r in rows]
    bounds = [r[3] for r in rows]
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    finite = [(x, y, e) for x, y, e in zip(xs, ys, yerrs) if y is not None and not math.isinf(float(x))]
    if finite:
        fx, fy, fe = zip(*finite)
        ax.errorbar(fx, fy, yerr=fe, fmt="o-", capsize=3, label=f"measured ({measure})")
    fin_b = [(x, b) for x, b in zip(xs, bounds) if b is not None and not math.isinf(float(x))]
    if fin_b:
        bx, by = zip(*fin_b)
        ax.plot(bx, by, "k--", label="bound rhs")
    positive = all(y is not None and y > 0 for y in ys) and all(float(x) > 0 for x in xs if not math.isinf(float(x)))
    if positive and len(finite) > 1:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(axis)
    ax.set_ylabel("observable error")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    png_path = os.path.join(out_dir, stem + ".png")
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return png_path
