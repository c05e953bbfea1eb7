"""Experiment harness: JSON config ingestion, seeded Monte Carlo sweeps,
CSV persistence.

dBm and dB values exist only at this boundary; everything behind it works
in watts and linear ratios.  Sweeps are paired: every scheme sees the same
channel and the same initial phases for a given seed, with per-seed seeds
derived as master_seed + realization_index so partial re-runs reproduce
rows.  Rows are emitted in a fixed order regardless of worker scheduling,
so identical inputs give byte-identical CSV output.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from . import baselines, driver
from .channel import ChannelConfig, realize, substream
from .errors import ConfigError
from .model import SystemConfig

__all__ = [
    "ExperimentSpec",
    "dbm_to_watts",
    "watts_to_dbm",
    "db_to_linear",
    "load_config",
    "parse_system",
    "parse_channel",
    "run_cell",
    "run_sweep",
    "rows_to_csv",
    "CSV_HEADER",
]

CSV_HEADER = "seed,M,N,p_max_dbm,p_c_dbm,scheme,ee,sum_rate,power_w,outer_iters,rank_one_frac,status"

AXES = ("N", "M", "p_c_dbm", "p_max_dbm")
SCHEMES = ("proposed", "random_phase", "oma")
OK_STATUSES = ("converged", "max_iters", "sdr_infeasible_stop")

# sub-stream tags per realization; the random-phase baseline shares the
# initial-phase tag so its drawn phases equal the proposed run's theta0
TAG_CHANNEL = 0
TAG_THETA0 = 1
TAG_DRIVER = 2
TAG_OMA = 3


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(w: float) -> float:
    return 10.0 * math.log10(w) + 30.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class ExperimentSpec:
    system: SystemConfig
    channel: ChannelConfig
    axis: str
    values: tuple[float, ...]
    schemes: tuple[str, ...]
    num_seeds: int
    master_seed: int

    def __post_init__(self) -> None:
        if self.axis not in AXES:
            raise ConfigError(f"sweep.axis must be one of {AXES}")
        if not self.values:
            raise ConfigError("sweep.values must be non-empty")
        if list(self.values) != sorted(self.values) or len(set(self.values)) != len(self.values):
            raise ConfigError("sweep.values must be strictly increasing")
        if self.axis in ("N", "M") and any(v <= 0 or v != int(v) for v in self.values):
            raise ConfigError("element/antenna sweep values must be positive integers")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown:
            raise ConfigError(f"unknown schemes: {sorted(unknown)}")
        if self.num_seeds < 1:
            raise ConfigError("sweep.num_seeds must be at least 1")


def _get(d: dict, path: str, key: str, default=None, required=False):
    if key in d:
        return d[key]
    if required:
        raise ConfigError(f"missing config key {path}.{key}")
    return default


def parse_system(d: dict, path: str = "system") -> SystemConfig:
    """Build a SystemConfig from a JSON object, converting dBm/dB fields."""
    if not isinstance(d, dict):
        raise ConfigError(f"{path} must be an object")

    def power(key_w: str, key_dbm: str, default=None, required=False):
        if key_w in d and key_dbm in d:
            raise ConfigError(f"{path}: give {key_w} or {key_dbm}, not both")
        if key_w in d:
            return float(d[key_w])
        if key_dbm in d:
            return dbm_to_watts(float(d[key_dbm]))
        if required:
            raise ConfigError(f"missing config key {path}.{key_w} (or .{key_dbm})")
        return default

    if "sinr_min_db" in d:
        raw = d["sinr_min_db"]
        sinr = tuple(db_to_linear(float(g)) for g in raw)
    elif "sinr_min" in d:
        sinr = tuple(float(g) for g in d["sinr_min"])
    else:
        sinr = (10.0, 10.0)
    if len(sinr) != 2:
        raise ConfigError(f"{path}.sinr_min must have two entries")

    kwargs = dict(
        num_antennas=int(_get(d, path, "num_antennas", required=True)),
        num_elements=int(_get(d, path, "num_elements", required=True)),
        amp_efficiency=float(_get(d, path, "amp_efficiency", 0.6)),
        p_max=power("p_max_w", "p_max_dbm", required=True),
        noise_power=power("noise_power_w", "noise_power_dbm", required=True),
        sinr_min=sinr,
        sca_tol=float(_get(d, path, "sca_tol", 1e-3)),
        outer_tol=float(_get(d, path, "outer_tol", 1e-3)),
        max_inner_iters=int(_get(d, path, "max_inner_iters", 100)),
        max_outer_iters=int(_get(d, path, "max_outer_iters", 30)),
        order_norm=str(_get(d, path, "order_norm", "l2")),
    )
    p_c = power("p_circuit_w", "p_circuit_dbm")
    if p_c is not None:
        kwargs["p_circuit_override"] = p_c
    kwargs["p_dynamic"] = power("p_dynamic_w", "p_dynamic_dbm", 0.0)
    kwargs["p_static"] = power("p_static_w", "p_static_dbm", 0.0)
    try:
        return SystemConfig(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_channel(d: dict, path: str = "channel") -> ChannelConfig:
    if not isinstance(d, dict):
        raise ConfigError(f"{path} must be an object")
    d_iu = d.get("d_iu", (10.0, 20.0))
    if len(d_iu) != 2:
        raise ConfigError(f"{path}.d_iu must have two entries")
    try:
        return ChannelConfig(
            d_bi=float(d.get("d_bi", 40.0)),
            d_iu=tuple(float(x) for x in d_iu),
            alpha_bi=float(d.get("alpha_bi", 2.2)),
            alpha_iu=float(d.get("alpha_iu", 2.5)),
            rician_k=float(d.get("rician_k", 2.0)),
            pl_ref_db=float(d.get("pl_ref_db", -30.0)),
            seed=int(d.get("seed", 0)),
        )
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_config(path: str) -> dict:
    """Read and parse a JSON config file; errors carry line positions."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    return doc


def parse_spec(doc: dict, path: str = "") -> ExperimentSpec:
    system = parse_system(_get(doc, path or "config", "system", required=True))
    channel = parse_channel(doc.get("channel", {}))
    sweep = _get(doc, path or "config", "sweep", required=True)
    if not isinstance(sweep, dict):
        raise ConfigError("sweep must be an object")
    return ExperimentSpec(
        system=system,
        channel=channel,
        axis=str(_get(sweep, "sweep", "axis", required=True)),
        values=tuple(sweep.get("values") or ()),
        schemes=tuple(sweep.get("schemes", ("proposed",))),
        num_seeds=int(sweep.get("num_seeds", 1)),
        master_seed=int(doc.get("seed", 0)),
    )


def apply_axis(system: SystemConfig, axis: str, value: float) -> SystemConfig:
    if axis == "N":
        return replace(system, num_elements=int(value))
    if axis == "M":
        return replace(system, num_antennas=int(value))
    if axis == "p_c_dbm":
        return replace(system, p_circuit_override=dbm_to_watts(value))
    if axis == "p_max_dbm":
        return replace(system, p_max=dbm_to_watts(value))
    raise ConfigError(f"unknown axis {axis}")


def _row(seed: int, cfg: SystemConfig, scheme: str, **kw) -> dict:
    return {
        "seed": seed,
        "M": cfg.num_antennas,
        "N": cfg.num_elements,
        "p_max_dbm": watts_to_dbm(cfg.p_max),
        "p_c_dbm": watts_to_dbm(cfg.p_circuit),
        "scheme": scheme,
        "ee": kw.get("ee", math.nan),
        "sum_rate": kw.get("sum_rate", math.nan),
        "power_w": kw.get("power_w", math.nan),
        "outer_iters": kw.get("outer_iters", 0),
        "rank_one_frac": kw.get("rank_one_frac", math.nan),
        "status": kw.get("status", "error"),
    }


def run_cell(cfg: SystemConfig, ccfg: ChannelConfig, seed: int,
             schemes: tuple[str, ...]) -> list[dict]:
    """All requested schemes on one seeded channel realization."""
    ch = realize(cfg, ccfg, substream(seed, TAG_CHANNEL))
    theta0 = driver.default_theta0(cfg.num_elements, substream(seed, TAG_THETA0))
    rows = []
    for scheme in schemes:
        try:
            if scheme == "proposed":
                rep = driver.run(cfg, ch, theta0, substream(seed, TAG_DRIVER))
                rows.append(_row(seed, cfg, scheme, ee=rep.ee,
                                 sum_rate=rep.r1 + rep.r2, power_w=rep.power,
                                 outer_iters=rep.outer_iters,
                                 rank_one_frac=rep.rank_one_frac, status=rep.status))
            elif scheme == "random_phase":
                res = baselines.random_phase_noma(cfg, ch, substream(seed, TAG_THETA0))
                rows.append(_row(seed, cfg, scheme, ee=res.ee,
                                 sum_rate=res.r1 + res.r2, power_w=res.power,
                                 outer_iters=1, status=res.status))
            else:
                res = baselines.oma_tdma(cfg, ch, substream(seed, TAG_OMA))
                rows.append(_row(seed, cfg, scheme, ee=res.ee,
                                 sum_rate=res.r1 + res.r2, power_w=res.power,
                                 outer_iters=1, status=res.status))
        except Exception as exc:  # noqa: BLE001 - a cell must never kill a sweep
            rows.append(_row(seed, cfg, scheme, status=f"error:{type(exc).__name__}"))
    return rows


def _cell_worker(args):
    cfg, ccfg, seed, schemes = args
    return run_cell(cfg, ccfg, seed, schemes)


def aggregate_rows(rows: list[dict]) -> list[dict]:
    """Mean rows per (axis cell, scheme) over successfully solved runs.

    A run counts when its status is one of OK_STATUSES; rank_one_frac is
    averaged over the rows where it is defined.  Aggregate rows carry
    seed = -1 and status = "mean".
    """
    groups: dict[tuple, list[dict]] = {}
    order: list[tuple] = []
    for r in rows:
        key = (r["M"], r["N"], r["p_max_dbm"], r["p_c_dbm"], r["scheme"])
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(r)
    out = []
    for key in order:
        ok = [r for r in groups[key] if r["status"] in OK_STATUSES]
        m, n, pmax, pc, scheme = key
        if ok:
            rof = [r["rank_one_frac"] for r in ok if not math.isnan(r["rank_one_frac"])]
            agg = dict(
                ee=sum(r["ee"] for r in ok) / len(ok),
                sum_rate=sum(r["sum_rate"] for r in ok) / len(ok),
                power_w=sum(r["power_w"] for r in ok) / len(ok),
                outer_iters=sum(r["outer_iters"] for r in ok) / len(ok),
                rank_one_frac=sum(rof) / len(rof) if rof else math.nan,
            )
        else:
            agg = dict(ee=math.nan, sum_rate=math.nan, power_w=math.nan,
                       outer_iters=0, rank_one_frac=math.nan)
        out.append({
            "seed": -1, "M": m, "N": n, "p_max_dbm": pmax, "p_c_dbm": pc,
            "scheme": scheme, "status": "mean", **agg,
        })
    return out


def run_sweep(spec: ExperimentSpec, jobs: int = 1) -> list[dict]:
    """All (axis value, seed, scheme) rows plus aggregate rows, in
    deterministic order."""
    cells = []
    for value in spec.values:
        cfg = apply_axis(spec.system, spec.axis, value)
        for i in range(spec.num_seeds):
            cells.append((cfg, spec.channel, spec.master_seed + i, spec.schemes))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell_worker, cells, chunksize=1))
    else:
        results = [run_cell(*c) for c in cells]
    rows = [r for cell_rows in results for r in cell_rows]
    return rows + aggregate_rows(rows)


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".9g")
    return str(x)


def rows_to_csv(rows: list[dict]) -> str:
    lines = [CSV_HEADER]
    cols = CSV_HEADER.split(",")
    for r in rows:
        lines.append(",".join(_fmt(r[c]) for c in cols))
    return "\n".join(lines) + "\n"
