"""Figure rendering for the report command.

Reads the delimited outputs written by the other commands and renders
matplotlib figures next to them.  Rendering is best-effort per figure: a
missing input file simply skips that figure.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_instance_figures", "render_rate_figure"]


def _read_csv_columns(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return {name: data[:, k] for k, name in enumerate(header)}


def _style_axes(ax, xlabel: str, ylabel: str) -> None:
    ax.grid(True, alpha=0.3)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(loc="best", fontsize=9)


def render_instance_figures(out_dir: Path) -> list[str]:
    """Render every figure whose plot data exists in ``out_dir``; list what was made."""
    out_dir = Path(out_dir)
    fig_dir = out_dir / "figures"
    made: list[str] = []

    def save(fig, name: str) -> None:
        fig_dir.mkdir(parents=True, exist_ok=True)
        target = fig_dir / name
        fig.savefig(target, dpi=150, bbox_inches="tight")
        plt.close(fig)
        made.append(str(target.relative_to(out_dir)))

    solve_pd = out_dir / "plotdata_solve.csv"
    if solve_pd.exists():
        cols = _read_csv_columns(solve_pd)
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(cols["x"], cols["ground_truth"], "b--", label="ground truth")
        ax.plot(cols["x"], cols["observed"], "g-", alpha=0.7, label="observed")
        ax.plot(cols["x"], cols["reconstruction"], "r-.", label="reconstruction")
        _style_axes(ax, "x", "value")
        save(fig, "reconstruction.png")

    deb_pd = out_dir / "plotdata_debias.csv"
    if deb_pd.exists():
        cols = _read_csv_columns(deb_pd)
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(cols["x"], cols["ground_truth"], "b--", label="ground truth")
        ax.plot(cols["x"], cols["reconstruction"], "r-.", label="reconstruction")
        ax.plot(cols["x"], cols["debiased"], "k:", lw=2, label="debiased")
        _style_axes(ax, "x", "value")
        save(fig, "debias.png")

    bars_pd = out_dir / "plotdata_errorbars.csv"
    if bars_pd.exists():
        cols = _read_csv_columns(bars_pd)
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(cols["x"], cols["ground_truth"], "b--", label="ground truth")
        ax.plot(cols["x"], cols["reconstruction"], "r-.", label="reconstruction")
        ax.plot(cols["x"], cols["lower"], "c--", label="lower bound")
        ax.plot(cols["x"], cols["upper"], "m--", label="upper bound")
        _style_axes(ax, "x", "value")
        save(fig, "errorbars.png")

    base_pd = out_dir / "plotdata_baseline.csv"
    if base_pd.exists():
        cols = _read_csv_columns(base_pd)
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(cols["x"], cols["ground_truth"], "b--", label="ground truth")
        for name, style in (
            ("naive", "r-."),
            ("morozov", "y-"),
            ("morozov_modified", "k:"),
        ):
            if name in cols:
                ax.plot(cols["x"], cols[name], style, label=name.replace("_", " "))
        _style_axes(ax, "x", "value")
        save(fig, "baseline.png")

    rate_csv = out_dir / "rate.csv"
    if rate_csv.exists():
        made += render_rate_figure(out_dir, rate_csv)
    return made


def render_rate_figure(out_dir: Path, rate_csv: Path) -> list[str]:
    out_dir = Path(out_dir)
    cols = _read_csv_columns(Path(rate_csv))
    fig, ax = plt.subplots(figsize=(6, 4.5))
    eps = cols["eps"]
    breg = np.maximum(cols["bregman"], 1e-16)
    ax.loglog(eps, breg, "o-", label="symmetric Bregman distance")
    slope = None
    rate_report = out_dir / "rate_report.json"
    if rate_report.exists():
        slope = json.loads(rate_report.read_text()).get("slope")
    if slope is not None:
        ref = breg[0] * (eps / eps[0]) ** slope
        ax.loglog(eps, ref, "k--", alpha=0.6, label=f"slope {slope:.2f}")
    ax.invert_xaxis()
    ax.grid(True, which="both", alpha=0.3)
    ax.set_xlabel("data width eps")
    ax.set_ylabel("distance")
    ax.legend(loc="best", fontsize=9)
    fig_dir = out_dir / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    target = fig_dir / "rate.png"
    fig.savefig(target, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return [str(target.relative_to(out_dir))]
