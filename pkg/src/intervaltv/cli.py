"""Command-line front end.

Subcommands: ``synth``, ``solve``, ``debias``, ``errorbars``, ``rate``,
``baseline``, ``report``.  Every data-producing command writes delimited
files plus a JSON report embedding the config hash and package version; the
``report`` command renders figures from the delimited outputs.

Exit codes: 0 success, 1 invariant or solver failure, 2 input error.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, lp
from .analysis import rate_experiment
from .baselines import MorozovResult
from .debias import debias, error_bars, manifold_from_solve
from .experiments import (
    ExperimentConfig,
    Instance,
    run_jump_regions,
    run_morozov,
    run_naive_solve,
    synthesize,
)
from .operators import DenseOperator, IntervalData, IntervalOperator
from .signals import Grid, Signal, l1_norm, linf_norm, psnr, ssim_1d, tv
from .solver import PrimalSolveReport, solve_primal

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_INPUT = 2


def _report_header(config: ExperimentConfig) -> dict:
    return {"config_hash": config.config_hash(), "version": __version__}


def _write_plotdata(path: Path, columns: dict[str, np.ndarray]) -> None:
    names = list(columns)
    arrays = [np.asarray(columns[k], dtype=float) for k in names]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*arrays):
            w.writerow([format(v, ".17g") for v in row])


def write_instance(inst: Instance, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    inst.u_exact.to_csv(out / "ground_truth.csv")
    inst.f_clean.to_csv(out / "data_clean.csv")
    inst.f_noisy.to_csv(out / "data_noisy.csv")
    inst.data.lower.to_csv(out / "data_lower.csv")
    inst.data.upper.to_csv(out / "data_upper.csv")
    inst.a_exact.to_csv(out / "operator_exact.csv")
    inst.a_noisy.to_csv(out / "operator_noisy.csv")
    inst.op.lower.to_csv(out / "operator_lower.csv")
    inst.op.upper.to_csv(out / "operator_upper.csv")
    meta = {
        "config": json.loads(inst.config.to_json()),
        "config_hash": inst.config.config_hash(),
        "version": __version__,
        "delta": inst.delta,
        "d_op": inst.d_op,
    }
    (out / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=1))


def load_instance(out: Path) -> Instance:
    meta_path = out / "meta.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"no instance found in {out} (missing meta.json)")
    meta = json.loads(meta_path.read_text())
    config = ExperimentConfig.from_json(json.dumps(meta["config"]))
    h = config.h
    grid = Grid(config.n, h)
    sig = lambda name: Signal.from_csv(out / name, h=h)
    mat = lambda name: DenseOperator.from_csv(out / name)
    return Instance(
        config=config,
        grid=grid,
        u_exact=sig("ground_truth.csv"),
        a_exact=mat("operator_exact.csv"),
        f_clean=sig("data_clean.csv"),
        f_noisy=sig("data_noisy.csv"),
        delta=float(meta["delta"]),
        a_noisy=mat("operator_noisy.csv"),
        d_op=float(meta["d_op"]),
        data=IntervalData(lower=sig("data_lower.csv"), upper=sig("data_upper.csv")),
        op=IntervalOperator(lower=mat("operator_lower.csv"), upper=mat("operator_upper.csv")),
    )


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_json(Path(args.config).read_text())
    else:
        cfg = ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.gamma is not None:
        cfg = replace(cfg, gamma=args.gamma)
    return cfg


def _metrics(u: Signal, inst: Instance) -> dict:
    return {
        "psnr": psnr(u, inst.u_exact),
        "ssim": ssim_1d(u, inst.u_exact),
        "tv": tv(u),
        "l1": l1_norm(u),
        "linf_error": linf_norm(Signal(u.grid, u.values - inst.u_exact.values)),
    }


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    errs = cfg.validate()
    if errs:
        for e in errs:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_INPUT
    inst = synthesize(cfg)
    out = Path(args.out)
    write_instance(inst, out)
    reloaded = load_instance(out)
    assert reloaded.data.contains(reloaded.f_clean, tol=1e-12)
    print(f"instance written to {out} (hash {cfg.config_hash()})")
    return EXIT_OK


def cmd_solve(args) -> int:
    out = Path(args.out)
    try:
        inst = load_instance(out)
    except FileNotFoundError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    rep = solve_primal(inst.regularizer, inst.op, inst.data)
    payload = _report_header(inst.config)
    payload["report"] = json.loads(rep.to_json())
    if rep.status == lp.OPTIMAL:
        payload["metrics"] = _metrics(rep.u, inst)
        payload["passed"] = rep.ok(1e-7)
        rep.u.to_csv(out / "solution.csv")
        _write_plotdata(
            out / "plotdata_solve.csv",
            {
                "x": inst.grid.x,
                "ground_truth": inst.u_exact.values,
                "observed": inst.f_noisy.values,
                "reconstruction": rep.u.values,
            },
        )
    else:
        payload["passed"] = False
    (out / "solve_report.json").write_text(json.dumps(payload, sort_keys=True, indent=1))
    print(f"solve: {rep.status}, objective {rep.objective}, passed {payload['passed']}")
    return EXIT_OK if payload["passed"] else EXIT_INVARIANT


def _load_solved(out: Path) -> tuple[Instance, PrimalSolveReport]:
    inst = load_instance(out)
    report_path = out / "solve_report.json"
    if not report_path.exists():
        raise FileNotFoundError(f"no solve report in {out}; run solve first")
    payload = json.loads(report_path.read_text())
    rep = PrimalSolveReport.from_json(json.dumps(payload["report"]))
    if rep.status != lp.OPTIMAL:
        raise ValueError(f"stored solve has status {rep.status}")
    return inst, rep.with_context(inst.op, inst.data)


def cmd_debias(args) -> int:
    out = Path(args.out)
    try:
        inst, rep = _load_solved(out)
    except (FileNotFoundError, ValueError) as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    manifold = manifold_from_solve(rep, inst.config.eps_manifold, inst.config.c_cap)
    result = debias(manifold)
    payload = _report_header(inst.config)
    payload.update(
        gap=result.gap,
        iterations=result.iterations,
        converged=result.converged,
        objective=result.objective,
        metrics=_metrics(result.u, inst),
        passed=result.converged and manifold.membership(result.u, 1e-7),
    )
    result.u.to_csv(out / "debiased.csv")
    _write_plotdata(
        out / "plotdata_debias.csv",
        {
            "x": inst.grid.x,
            "ground_truth": inst.u_exact.values,
            "observed": inst.f_noisy.values,
            "reconstruction": rep.u.values,
            "debiased": result.u.values,
        },
    )
    (out / "debias_report.json").write_text(json.dumps(payload, sort_keys=True, indent=1))
    print(f"debias: gap {result.gap:.3g} after {result.iterations} iterations")
    return EXIT_OK if payload["passed"] else EXIT_INVARIANT


def cmd_errorbars(args) -> int:
    out = Path(args.out)
    try:
        inst, rep = _load_solved(out)
    except (FileNotFoundError, ValueError) as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    q, regions = run_jump_regions(inst, rep)
    manifold = manifold_from_solve(rep, inst.config.eps_manifold, inst.config.c_cap)
    bars = error_bars(manifold, regions)
    bars.to_csv(out / "errorbars.csv", inst.grid, u_exact=inst.u_exact)
    lower = np.empty(inst.grid.n)
    upper = np.empty(inst.grid.n)
    for k, (s, e) in enumerate(regions.regions):
        lower[s:e] = bars.lower[k]
        upper[s:e] = bars.upper[k]
    _write_plotdata(
        out / "plotdata_errorbars.csv",
        {
            "x": inst.grid.x,
            "ground_truth": inst.u_exact.values,
            "observed": inst.f_noisy.values,
            "reconstruction": rep.u.values,
            "lower": lower,
            "upper": upper,
        },
    )
    contained = bool(
        np.all(bars.lower <= bars.ref_mean + 1e-9) and np.all(bars.ref_mean <= bars.upper + 1e-9)
    )
    payload = _report_header(inst.config)
    payload.update(
        regions=[list(r) for r in regions.regions],
        jump_slots=list(regions.jumps),
        statuses=list(bars.statuses),
        passed=contained and all(s == lp.OPTIMAL for s in bars.statuses),
    )
    (out / "errorbars_report.json").write_text(json.dumps(payload, sort_keys=True, indent=1))
    print(f"errorbars: {len(regions)} regions, contained={contained}")
    return EXIT_OK if payload["passed"] else EXIT_INVARIANT


def cmd_rate(args) -> int:
    cfg = _load_config(args)
    errs = cfg.validate()
    if errs:
        for e in errs:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inst = synthesize(cfg)
    try:
        table = rate_experiment(
            inst.regularizer,
            cfg.schedule.to_schedule(),
            inst.f_clean,
            inst.a_exact,
            inst.u_exact,
            rng_seed=cfg.seed,
        )
    except ValueError as exc:
        print(f"rate experiment failed: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    table.to_csv(out / "rate.csv")
    payload = _report_header(cfg)
    payload.update(
        slope=table.slope,
        mu_min_l1=table.mu_min_l1,
        note=table.note,
        thresholds=list(table.thresholds),
        eps=[r.eps for r in table.rows],
        bregman=[r.bregman for r in table.rows],
    )
    (out / "rate_report.json").write_text(json.dumps(payload, sort_keys=True, indent=1))
    print(f"rate: slope {table.slope}, {len(table.rows)} steps")
    return EXIT_OK


def cmd_baseline(args) -> int:
    out = Path(args.out)
    try:
        inst = load_instance(out)
    except FileNotFoundError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    payload = _report_header(inst.config)
    columns = {
        "x": inst.grid.x,
        "ground_truth": inst.u_exact.values,
        "observed": inst.f_noisy.values,
    }
    summary_rows = []
    naive = run_naive_solve(inst)
    payload["naive"] = {"status": naive.status}
    if naive.status == lp.OPTIMAL:
        payload["naive"].update(_metrics(naive.u, inst))
        naive.u.to_csv(out / "baseline_naive.csv")
        columns["naive"] = naive.u.values
        summary_rows.append(("naive", naive.status, _metrics(naive.u, inst)))
    else:
        summary_rows.append(("naive", naive.status, None))
    failures = 0
    for name, modified in (("morozov", False), ("morozov_modified", True)):
        try:
            res: MorozovResult = run_morozov(inst, modified=modified)
        except (ValueError, RuntimeError) as exc:
            payload[name] = {"status": f"failed: {exc}"}
            summary_rows.append((name, "failed", None))
            failures += 1
            continue
        payload[name] = {
            "status": "optimal",
            "alpha": res.alpha,
            "residual": res.residual,
            "target": res.target,
            "fallback_used": res.fallback_used,
        }
        payload[name].update(_metrics(res.u, inst))
        res.u.to_csv(out / f"baseline_{name}.csv")
        columns[name] = res.u.values
        summary_rows.append((name, "optimal", _metrics(res.u, inst)))
    _write_plotdata(out / "plotdata_baseline.csv", columns)
    with open(out / "baseline_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "status", "psnr", "ssim", "tv", "l1", "linf_error"])
        for name, status, metrics in summary_rows:
            row = [name, status]
            row += (
                [format(metrics[k], ".17g") for k in ("psnr", "ssim", "tv", "l1", "linf_error")]
                if metrics
                else ["", "", "", "", ""]
            )
            w.writerow(row)
    (out / "baseline_report.json").write_text(json.dumps(payload, sort_keys=True, indent=1))
    print(f"baseline: naive {naive.status}, morozov x2 ({failures} failures)")
    return EXIT_OK if failures == 0 else EXIT_INVARIANT


def cmd_report(args) -> int:
    from .reports import render_instance_figures

    out = Path(args.out)
    if not out.exists():
        print(f"no output directory {out}", file=sys.stderr)
        return EXIT_INPUT
    dirs = [out] + sorted(d for d in out.glob("seed-*") if d.is_dir())
    rendered = {}
    for d in dirs:
        made = render_instance_figures(d)
        if made:
            rendered[str(d.relative_to(out)) or "."] = made
    if not rendered:
        print("nothing to render: no plot data found", file=sys.stderr)
        return EXIT_INPUT
    summary = {"version": __version__, "figures": rendered}
    (out / "report_summary.json").write_text(json.dumps(summary, sort_keys=True, indent=1))
    total = sum(len(v) for v in rendered.values())
    print(f"rendered {total} figures under {out}")
    return EXIT_OK


def _run_seeded(func, args, seeds, threads: int) -> int:
    """Fan one command out over instance directories ``seed-<k>``."""
    jobs = []
    for s in seeds:
        sub = argparse.Namespace(**vars(args))
        sub.seed = s
        sub.out = str(Path(args.out) / f"seed-{s}")
        jobs.append(sub)
    if threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            codes = list(pool.map(func, jobs))
    else:
        codes = [func(j) for j in jobs]
    return max(codes)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="intervaltv",
        description="Interval-constrained TV regularisation experiments",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "synth": cmd_synth,
        "solve": cmd_solve,
        "debias": cmd_debias,
        "errorbars": cmd_errorbars,
        "rate": cmd_rate,
        "baseline": cmd_baseline,
        "report": cmd_report,
    }
    for name in commands:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="config JSON path")
        p.add_argument("--out", type=str, required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument(
            "--seeds", type=str, default=None, help="comma-separated seeds for batch runs"
        )
        p.add_argument("--gamma", type=float, default=None, help="regulariser weight override")
        p.add_argument("--threads", type=int, default=1, help="workers for batch runs")
    args = parser.parse_args(argv)
    func = commands[args.command]
    try:
        if args.seeds:
            seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
            if not seeds:
                print("empty seed list", file=sys.stderr)
                return EXIT_INPUT
            return _run_seeded(func, args, seeds, args.threads)
        return func(args)
    except Exception as exc:  # surface anything unexpected as an input/usage error
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
