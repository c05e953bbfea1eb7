"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 nothing solvable (the
realization, or every realization of a sweep, was infeasible).
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import baselines, driver, experiments
from .channel import realize, substream
from .errors import ConfigError
from .experiments import (
    OK_STATUSES,
    load_config,
    parse_channel,
    parse_spec,
    parse_system,
    rows_to_csv,
    run_cell,
    run_sweep,
)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="irsnoma",
        description="Energy-efficiency optimization of a 2-user downlink "
                    "MISO link assisted by a passive reflecting surface.")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-iteration progress")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="run the alternating optimizer on one realization")
    sp.add_argument("--config", required=True)
    sp.add_argument("--seed", type=int, default=None, help="override the config seed")

    sw = sub.add_parser("sweep", help="run the Monte Carlo sweep described by the config")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out", default=None, help="CSV path ('-' for stdout; default from config)")
    sw.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sw.add_argument("--axis", default=None, help="override the sweep axis")
    sw.add_argument("--values", default=None, help="override axis values (comma-separated)")
    sw.add_argument("--scheme", default=None, help="override schemes (comma-separated)")
    sw.add_argument("--seeds", type=int, default=None, help="override the seed count")

    bl = sub.add_parser("baseline", help="run comparison schemes on one realization")
    bl.add_argument("--config", required=True)
    bl.add_argument("--seed", type=int, default=None)
    bl.add_argument("--scheme", default="random_phase,oma", help="comma-separated schemes")

    orc = sub.add_parser("oracle", help="exhaustive search (single antenna only)")
    orc.add_argument("--config", required=True)
    orc.add_argument("--seed", type=int, default=None)
    orc.add_argument("--phase-levels", type=int, default=8)
    orc.add_argument("--power-grid", type=int, default=200)
    return p


def _one_realization(doc: dict, seed_override):
    cfg = parse_system(doc.get("system", {}))
    ccfg = parse_channel(doc.get("channel", {}))
    seed = int(doc.get("seed", 0)) if seed_override is None else seed_override
    ch = realize(cfg, ccfg, substream(seed, experiments.TAG_CHANNEL))
    return cfg, ccfg, ch, seed


def _cmd_solve(args) -> int:
    doc = load_config(args.config)
    cfg, _, ch, seed = _one_realization(doc, args.seed)
    theta0 = driver.default_theta0(cfg.num_elements, substream(seed, experiments.TAG_THETA0))
    rep = driver.run(cfg, ch, theta0, substream(seed, experiments.TAG_DRIVER))
    print(f"status        : {rep.status}")
    print(f"seed          : {seed}")
    print(f"user order    : {rep.user_order}")
    if rep.status == "init_infeasible":
        return 2
    print(f"outer iters   : {rep.outer_iters}  (inner per outer: {rep.inner_iters})")
    traj = ", ".join(f"{v:.6g}" for v in rep.ee_trajectory)
    print(f"ee trajectory : [{traj}]")
    print(f"final ee      : {rep.ee:.9g} bits/Hz/J")
    print(f"rates         : R1={rep.r1:.6g}  R2={rep.r2:.6g} bits/s/Hz")
    print(f"tx power      : {rep.power:.6g} W")
    print(f"rank-one frac : {rep.rank_one_frac:.3g}")
    print(f"order flipped : {rep.order_flipped_at_end}")
    if rep.rejected_phase_updates:
        print(f"rejected phase updates: {rep.rejected_phase_updates}")
    for ev in rep.events:
        print(f"note          : {ev}")
    return 0


def _cmd_sweep(args) -> int:
    doc = load_config(args.config)
    if args.axis or args.values or args.scheme or args.seeds is not None:
        sweep = dict(doc.get("sweep", {}))
        if args.axis:
            sweep["axis"] = args.axis
        if args.values:
            sweep["values"] = [float(v) for v in args.values.split(",")]
        if args.scheme:
            sweep["schemes"] = args.scheme.split(",")
        if args.seeds is not None:
            sweep["num_seeds"] = args.seeds
        doc["sweep"] = sweep
    spec = parse_spec(doc)
    rows = run_sweep(spec, jobs=max(1, args.jobs))
    csv = rows_to_csv(rows)
    out = args.out or doc.get("out")
    if out in (None, "-"):
        sys.stdout.write(csv)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(csv)
        print(f"wrote {out} ({len(rows)} rows)", file=sys.stderr)
    solved = [r for r in rows if r["seed"] >= 0 and r["status"] in OK_STATUSES]
    return 0 if solved else 2


def _cmd_baseline(args) -> int:
    doc = load_config(args.config)
    cfg, ccfg, _, seed = _one_realization(doc, args.seed)
    schemes = tuple(s.strip() for s in args.scheme.split(",") if s.strip())
    unknown = set(schemes) - set(experiments.SCHEMES)
    if unknown:
        raise ConfigError(f"unknown schemes: {sorted(unknown)}")
    rows = run_cell(cfg, ccfg, seed, schemes)
    any_ok = False
    for r in rows:
        print(f"{r['scheme']:13s} status={r['status']:12s} ee={r['ee']:.9g} "
              f"sum_rate={r['sum_rate']:.6g} power={r['power_w']:.6g}")
        any_ok |= r["status"] in OK_STATUSES
    return 0 if any_ok else 2


def _cmd_oracle(args) -> int:
    doc = load_config(args.config)
    cfg, _, ch, seed = _one_realization(doc, args.seed)
    ee = baselines.brute_force_oracle(cfg, ch, args.phase_levels, args.power_grid)
    print(f"oracle ee     : {ee:.9g} bits/Hz/J  "
          f"(levels={args.phase_levels}, grid={args.power_grid}, seed={seed})")
    return 0 if ee > float("-inf") else 2


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handlers = {
        "solve": _cmd_solve,
        "sweep": _cmd_sweep,
        "baseline": _cmd_baseline,
        "oracle": _cmd_oracle,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
