from typing import Any, Dict, List, Sequence, Tuple

import math

import pandas as pd

from logic.timescales import TimescaleReport


# --- number formatting helper ---
def _g(x, digits: int = 6) -> str:
    try:
        x = float(x)
    except (TypeError, ValueError):
        return str(x)
    if math.isnan(x):
        return "n/a"
    return f"{x:.{digits}g}"


def _aligned(rows: Sequence[Tuple[str, Any]]) -> str:
    """Two-column 'label  value' block with the values lined up."""
    width = max(len(label) for label, _ in rows)
    return "\n".join(f"{label.ljust(width)}  {value}" for label, value in rows)


def explain_timescales(report: TimescaleReport) -> Dict[str, Any]:
    row = report.as_row()
    rows = [
        ("hbar", _g(row["hbar"])),
        ("D", _g(row["D"])),
        ("lambda_bar", _g(row["lambda_bar"])),
        ("t*", _g(row["t_star"], 4)),
        ("t* (closed form)", _g(row["t_star_approx"], 4)),
        ("x0", _g(row["x0"], 4)),
        ("t_qc", _g(row["t_qc"], 4)),
        ("folding time", _g(row["folding_time"], 4)),
        ("l_cl(t*)", _g(row["l_cl_t_star"], 4)),
        ("regime", row["regime"]),
    ]
    info = [_describe_regime(report)]
    if not report.self_consistent:
        info.append("Folding starts after t*; the fold-spacing estimate does not apply yet.")
    return {
        "intent": "TIMESCALES",
        "answer": _aligned(rows),
        "stats": row,
        "important_info": info,
    }


def _describe_regime(report: TimescaleReport) -> str:
    if report.t_qc < report.t_star_exact:
        return (f"Interference is filtered (t_qc = {_g(report.t_qc, 4)}) before classical "
                f"structure freezes (t* = {_g(report.t_star_exact, 4)}).")
    return (f"Classical structure freezes at t* = {_g(report.t_star_exact, 4)}, "
            f"before interference is filtered at t_qc = {_g(report.t_qc, 4)}.")


def explain_scan(table: pd.DataFrame) -> Dict[str, Any]:
    columns = ["D", "t_star", "t_star_approx", "x0", "t_qc", "regime"]
    text = table[columns].to_string(index=False, float_format=lambda v: _g(v, 5))
    return {
        "intent": "TIMESCALES",
        "answer": text,
        "stats": {"rows": len(table)},
        "important_info": ["t* grows like ln(1/D); t_qc like 1/D."],
    }


def explain_cumulants(table: pd.DataFrame, lambda_local: float, n_trajectories: int) -> Dict[str, Any]:
    columns = ["time", "var_u_plus", "var_u_plus_expected", "var_u_minus",
               "var_u_minus_expected", "cov_u", "cov_u_expected", "passed"]
    text = table[columns].to_string(index=False, float_format=lambda v: _g(v, 5))
    z_cols = [c for c in table.columns if c.endswith("_z")]
    worst = float(table[z_cols].to_numpy().max()) if z_cols else float("nan")
    passed = bool(table["passed"].all())
    info = [
        f"Local exponent: {_g(lambda_local, 6)}",
        f"Trajectories: {n_trajectories}",
        f"Largest deviation: {_g(worst, 3)} standard errors",
    ]
    if table.attrs.get("undersized"):
        info.append("Ensemble is below the reporting size; errors are rough.")
    return {
        "intent": "LANGEVIN",
        "answer": text,
        "stats": {"passed": passed, "max_z": worst},
        "important_info": info,
    }


def explain_lyapunov(estimate, lambda_bar: float) -> Dict[str, Any]:
    rel = (estimate.value - lambda_bar) / lambda_bar if lambda_bar else float("nan")
    rows = [
        ("lambda estimate", _g(estimate.value, 5)),
        ("standard error", _g(estimate.stderr, 3)),
        ("configured lambda_bar", _g(lambda_bar, 5)),
        ("relative difference", f"{rel:+.1%}" if math.isfinite(rel) else "n/a"),
        ("trajectories used", estimate.n_used),
        ("escaped", estimate.n_escaped),
    ]
    return {
        "intent": "LYAPUNOV",
        "answer": _aligned(rows),
        "stats": {"value": estimate.value, "stderr": estimate.stderr},
        "important_info": [],
    }


def explain_manifold(polyline, overlap=None) -> Dict[str, Any]:
    q_star, p_star = polyline.fixed_point
    rows = [
        ("periodic point", f"({_g(q_star, 10)}, {_g(p_star, 10)})"),
        ("unstable multiplier", _g(polyline.multiplier, 6)),
        ("vertices", len(polyline.vertices)),
        ("max arc time", _g(float(polyline.arc_time.max()), 5)),
        ("resolution", _g(polyline.resolution)),
    ]
    stats = {"vertices": len(polyline.vertices)}
    if overlap is not None:
        fraction, width, t = overlap
        rows.append((f"overlap at t = {_g(t, 5)}", f"{_g(fraction, 4)} within {_g(width, 4)}"))
        stats["overlap"] = fraction
    return {
        "intent": "MANIFOLD",
        "answer": _aligned(rows),
        "stats": stats,
        "important_info": [],
    }


def explain_run(frames: Dict[str, pd.DataFrame], threshold=None) -> Dict[str, Any]:
    """Summary of one or two diagnostics series (keyed by mode)."""
    parts: List[str] = []
    info: List[str] = []
    stats: Dict[str, Any] = {}
    for mode, frame in frames.items():
        first, last = frame.iloc[0], frame.iloc[-1]
        parts.append(_describe_series(mode, first, last))
        stats[mode] = {"norm": float(last["norm"]), "negativity": float(last["negativity"])}
        if abs(last["norm"] - 1.0) > 1e-6:
            info.append(f"{mode}: norm drifted to {_g(last['norm'], 10)}")
        if last["boundary_mass"] > 1e-6:
            info.append(f"{mode}: {_g(last['boundary_mass'], 3)} of the mass sits near the box edge")

    quantum = frames.get("quantum")
    if quantum is not None and "l1" in quantum and quantum["l1"].notna().any():
        l1 = quantum["l1"]
        parts.append(f"Twin L1 distance: {_g(l1.iloc[0], 4)} at start, {_g(l1.iloc[-1], 4)} at end, "
                     f"largest {_g(l1.max(), 4)}.")
        stats["l1_final"] = float(l1.iloc[-1])
        if threshold is not None:
            below = quantum.loc[l1 <= threshold, "time"]
            stats["first_below"] = float(below.iloc[0]) if len(below) else None
            info.append(f"First time below threshold {_g(threshold, 4)}: "
                        + (_g(below.iloc[0], 5) if len(below) else "never"))

    return {
        "intent": "RUN",
        "answer": "\n".join(parts),
        "stats": stats,
        "important_info": info,
    }


def _describe_series(mode: str, first, last) -> str:
    return (f"{mode}: t = {_g(first['time'], 5)} -> {_g(last['time'], 5)}, "
            f"energy {_g(first['energy'], 6)} -> {_g(last['energy'], 6)}, "
            f"negativity {_g(first['negativity'], 4)} -> {_g(last['negativity'], 4)}, "
            f"min {_g(last['minval'], 4)}.")


def explain_slice(table: pd.DataFrame, p0: float) -> Dict[str, Any]:
    rows = [
        ("p0 requested", _g(p0)),
        ("nearest p row", table.attrs.get("row", "n/a")),
        ("time", _g(table.attrs.get("time", float("nan")), 6)),
        ("points", len(table)),
        ("max", _g(table["value"].max(), 5)),
        ("min", _g(table["value"].min(), 5)),
    ]
    return {"intent": "SLICE", "answer": _aligned(rows), "stats": {}, "important_info": []}


def format_payload(payload: Dict[str, Any]) -> str:
    lines = [payload["answer"]]
    lines += [f"- {item}" for item in payload.get("important_info", [])]
    return "\n".join(lines)
