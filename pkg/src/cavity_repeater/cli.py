"""Command-line front end: ``cavity-repeater {rate,sweep,optimize,simulate,verify}``.

Exit codes: 0 success, 1 failed check (verify suite or simulate z-score
guard), 2 invalid input (parse errors, unknown keys, bad parameters).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, chain, verify
from .config import (
    MAX_SWEEP_POINTS,
    PRESETS,
    TABLE3_EPSILON,
    TABLE3_ETA_S,
    ConfigError,
    RunConfig,
    resolve,
    to_dict,
)
from .rates import ParameterError, expected_pairs, key_rate, link_probability, optimize_depth, q_swap_photon

Z_GUARD = 5.0


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)  # shortest exact round-trip
    return str(v)


def to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(rows[0]))
        for row in rows:
            w.writerow([_fmt(v) for v in row.values()])
    return buf.getvalue()


def to_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def evaluate(cfg: RunConfig) -> tuple[int, dict]:
    """(n used, report dict) for one fully specified point."""
    if cfg.n == "optimal":
        opt = optimize_depth(cfg.params, cfg.L, cfg.n_m, tuple(cfg.n_range), cfg.n_s)
        return opt.n, opt.report.to_dict()
    return cfg.n, key_rate(cfg.params, cfg.topology()).to_dict()


def _sweep_row(args) -> dict:
    names, combo, cfg = args
    n, report = evaluate(cfg)
    row = dict(zip(names, combo))
    row["n"] = n
    row.update({k: report[k] for k in cfg.outputs})
    return row


def sweep_rows(cfg: RunConfig, workers: int = 1) -> list[dict]:
    names = [name for name, _ in cfg.sweep]
    jobs = [(names, combo, point) for combo, point in cfg.grid()]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_row, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [_sweep_row(j) for j in jobs]


def write_output(text: str, out: str | None, cfg: RunConfig, command: str, stdout) -> None:
    """Write ``text`` to ``out`` with a manifest beside it, or to ``stdout``."""
    if out is None:
        stdout.write(text)
        return
    path = Path(out)
    data = text.encode()
    path.write_bytes(data)
    manifest = {
        "tool": "cavity-repeater",
        "version": __version__,
        "command": command,
        "config": to_dict(cfg),
        "master_seed": cfg.seed,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "output": path.name,
        "sha256": hashlib.sha256(data).hexdigest(),
    }
    Path(f"{path}.manifest.json").write_text(to_json(manifest))


def _render(rows: list[dict] | dict, fmt: str) -> str:
    if fmt == "csv":
        return to_csv(rows if isinstance(rows, list) else [rows])
    return to_json(rows)


def cmd_rate(cfg: RunConfig, args, stdout) -> int:
    _, report = evaluate(cfg)
    write_output(to_json(report), args.out, cfg, "rate", stdout)
    return 0


def cmd_sweep(cfg: RunConfig, args, stdout) -> int:
    points = cfg.sweep_points
    if points > MAX_SWEEP_POINTS:
        print(f"error: sweep has {points} points, more than the limit of {MAX_SWEEP_POINTS}", file=sys.stderr)
        return 2
    rows = sweep_rows(cfg, args.workers)
    write_output(_render(rows, args.format), args.out, cfg, "sweep", stdout)
    return 0


def table3_grid(cfg: RunConfig) -> list[list[int]]:
    return [
        [
            optimize_depth(cfg.params.with_(eta_s=eta, epsilon_CN=eps), cfg.L, cfg.n_m, tuple(cfg.n_range), cfg.n_s).n
            for eps in TABLE3_EPSILON
        ]
        for eta in TABLE3_ETA_S
    ]


def cmd_optimize(cfg: RunConfig, args, stdout) -> int:
    if args.table3:
        grid = table3_grid(cfg)
        if args.format == "csv":
            rows = [
                {"eta_s": eta, "epsilon_CN": eps, "n": grid[i][j]}
                for i, eta in enumerate(TABLE3_ETA_S)
                for j, eps in enumerate(TABLE3_EPSILON)
            ]
            text = to_csv(rows)
        else:
            text = to_json({"eta_s": list(TABLE3_ETA_S), "epsilon_CN": list(TABLE3_EPSILON), "n": grid})
    else:
        opt = optimize_depth(cfg.params, cfg.L, cfg.n_m, tuple(cfg.n_range), cfg.n_s)
        text = to_json({"n": opt.n, "all_zero": opt.all_zero, "report": opt.report.to_dict()})
    write_output(text, args.out, cfg, "optimize", stdout)
    return 0


def simulate(cfg: RunConfig, workers: int = 1) -> dict:
    n = evaluate(cfg)[0] if cfg.n == "optimal" else cfg.n
    topo = cfg.topology(n)
    tc = chain.TrialConfig(
        cfg.params, topo, cfg.trials, cfg.seed, chain.Mode(cfg.mode), p0=cfg.p0, q=cfg.q
    )
    res = chain.run_trials(tc, workers=workers)
    closed = expected_pairs(tc.link_p, topo, tc.photon_q)
    diff = res.empirical_N_avg - closed
    se = res.standard_error
    if se > 0:
        z = diff / se
    else:
        z = 0.0 if abs(diff) <= 1e-12 * max(1.0, abs(closed)) else math.copysign(math.inf, diff)
    out = {
        "n": n,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "mode": cfg.mode,
        "p0": tc.link_p,
        "q_swap_photon": tc.photon_q,
        "empirical_N_avg": res.empirical_N_avg,
        "standard_error": se,
        "closed_form_N_avg": closed,
        "z": z,
        "mean_wall_time_s": float(res.wall_time_model.mean()),
        "expected_cycle_time_s": chain.expected_cycle_time(tc),
        "photons_spent_per_swap": [int(c) for c in res.photons_spent_per_swap],
    }
    if res.fidelities.size:
        out["min_fidelity"] = float(res.fidelities.min())
        out["mean_fidelity"] = float(res.fidelities.mean())
    return out


def cmd_simulate(cfg: RunConfig, args, stdout) -> int:
    summary = simulate(cfg, args.workers)
    if args.format == "csv":
        flat = {k: v for k, v in summary.items() if not isinstance(v, list)}
        text = to_csv([flat])
    else:
        text = to_json(summary)
    write_output(text, args.out, cfg, "simulate", stdout)
    if abs(summary["z"]) > Z_GUARD:
        print(f"error: |z| = {abs(summary['z']):.3g} exceeds {Z_GUARD}", file=sys.stderr)
        return 1
    return 0


def cmd_verify(cfg: RunConfig, args, stdout) -> int:
    results = verify.run_all()
    for r in results:
        print(r.summary(), file=stdout)
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {
    "rate": cmd_rate,
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML config or run manifest")
    common.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], dest="overrides")
    common.add_argument("--preset", choices=sorted(PRESETS))
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1)

    parser = argparse.ArgumentParser(prog="cavity-repeater", description="Cavity-QED quantum repeater models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("rate", parents=[common], help="key rate for one configuration")
    sub.add_parser("sweep", parents=[common], help="grid of key rates")
    opt = sub.add_parser("optimize", parents=[common], help="optimal nesting depth")
    opt.add_argument("--table3", action="store_true", help="n* over the eta_s x epsilon_CN grid")
    sim = sub.add_parser("simulate", parents=[common], help="Monte Carlo check of the pair count")
    sim.add_argument("--trials", type=int)
    sim.add_argument("--seed", type=int)
    sub.add_parser("verify", parents=[common], help="exhaustive protocol checks")
    return parser


def main(argv: list[str] | None = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    for flag in ("trials", "seed"):
        if getattr(args, flag, None) is not None:
            overrides.append(f"{flag}={getattr(args, flag)}")
    if args.format is None:
        args.format = "csv" if args.command == "sweep" else "json"
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = resolve(args.config, args.preset, overrides)
        return COMMANDS[args.command](cfg, args, stdout)
    except (ConfigError, ParameterError, chain.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
