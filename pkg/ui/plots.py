import math
from pathlib import Path
from typing import Dict, Optional

import numpy as np
import pandas as pd
import plotly.graph_objects as go

from logic.grid import Field

# Largest plotted cell count per axis; bigger fields are strided down
MAX_PLOT_POINTS = 1024


def _downsample(field: Field):
    g = field.grid
    sq = max(1, math.ceil(g.n_q / MAX_PLOT_POINTS))
    sp = max(1, math.ceil(g.n_p / MAX_PLOT_POINTS))
    return g.q[::sq], g.p[::sp], field.values.real[::sq, ::sp]


def render_field(field: Field, hbar: Optional[float] = None, title: str = ""):
    """
    Heatmap of f(q, p) with q across and p up. The diverging scale is
    centred at zero; Wigner fields (hbar > 0) are clipped to +-(pi hbar)^-1.
    """
    q, p, z = _downsample(field)
    if hbar is not None and hbar > 0:
        bound = 1.0 / (math.pi * hbar)
    else:
        bound = float(np.max(np.abs(z))) or 1.0
    fig = go.Figure(
        data=go.Heatmap(
            x=q,
            y=p,
            z=z.T,
            zmid=0.0,
            zmin=-bound,
            zmax=bound,
            colorscale="RdBu_r",
            colorbar=dict(title="f"),
            hovertemplate="q: %{x:.4g}<br>p: %{y:.4g}<br>f: %{z:.4g}<extra></extra>",
        )
    )
    _style_common(fig, title or f"t = {field.time:.6g}")
    return fig


def add_manifold(fig, polyline: pd.DataFrame):
    """Draw the (q, p) polyline of an unstable manifold over the field."""
    if polyline is None or len(polyline) == 0:
        return fig

    fig.add_trace(
        go.Scatter(
            x=polyline["q"],
            y=polyline["p"],
            mode="lines",
            name="Unstable manifold",
            line=dict(width=1, color="black"),
            hoverinfo="skip",
        )
    )
    return fig


def render_slices(slices: Dict[str, pd.DataFrame], p0: float):
    """Overlay of f(q, p0) for several fields (quantum vs classical)."""
    fig = go.Figure()
    for name, table in slices.items():
        fig.add_trace(go.Scatter(x=table["q"], y=table["value"], mode="lines", name=name))
    fig.update_layout(
        title=f"p = {p0:.6g}",
        xaxis=dict(title="q"),
        yaxis=dict(title="f(q, p0)"),
        height=420,
    )
    return fig


def render_series(frames: Dict[str, pd.DataFrame], column: str, log_y: bool = False):
    """One diagnostics column against time, one line per run."""
    fig = go.Figure()
    for name, frame in frames.items():
        if column in frame and frame[column].notna().any():
            fig.add_trace(go.Scatter(x=frame["time"], y=frame[column], mode="lines", name=name))
    fig.update_layout(
        xaxis=dict(title="t"),
        yaxis=dict(title=column, type="log" if log_y else "linear"),
        height=420,
    )
    return fig


def save_html(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.write_html(str(path), include_plotlyjs="cdn", full_html=True)
    return path


def _style_common(fig, title: str):
    """
    Shared axis styling for phase-space heatmaps.
    """
    fig.update_layout(
        title=title,
        xaxis=dict(
            title="q",
            constrain="domain",
        ),
        yaxis=dict(
            title="p",
        ),
        margin=dict(l=40, r=10, t=40, b=40),
        height=560,
    )
