"""Experiment driver: parameter sweeps, figure runs and CSV output.

Every numeric column name ends in its provenance (``_analytic`` or
``_sim``); cells a run did not compute are left empty.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import analytic, metrics, simulator
from .config import ConfigError, NetworkConfig, NomaConfig, check, load_config

log = logging.getLogger("nomahet")

OUT_DIR_ENV = "NOMAHET_OUT_DIR"
AXES = ("rate_pl", "rate_sl", "alpha_p")
MODES = ("analytic", "sim", "both")

COLUMNS = (
    "series", "axis", "axis_value", "alpha_p", "rate_pl", "rate_sl",
    "p_pl_analytic", "p_pl_analytic_err", "p_pl_sim", "p_pl_sim_ci",
    "p_psl_analytic", "p_psl_analytic_err", "p_psl_sim", "p_psl_sim_ci",
    "avg_rate_noma_analytic", "avg_rate_noma_sim", "avg_rate_noma_sim_ci",
    "avg_rate_oma_analytic", "avg_rate_oma_sim", "avg_rate_oma_sim_ci",
    "avg_mos_noma_analytic", "avg_mos_noma_sim", "avg_mos_noma_sim_ci",
    "avg_mos_oma_analytic", "avg_mos_oma_sim", "avg_mos_oma_sim_ci",
    "rate_gain_sim_ci", "mos_gain_sim_ci",
    "case1_share_analytic", "case2_share_analytic", "case3_share_analytic",
    "case1_share_sim", "case2_share_sim", "case3_share_sim",
    "runtime_ms", "status",
)

FIGURE_AXES = {2: "rate_pl", 3: "alpha_p", 4: "rate_sl", 5: "rate_sl"}
FIG2_ALPHAS = (0.6, 0.7, 0.8, 0.9)
FIG45_ALPHAS = (0.5, 0.7, 0.9)
COVERAGE_TOL = 0.03


def _grid(start, stop, step):
    n = int(round((stop - start) / step)) + 1
    return tuple(round(start + k * step, 10) for k in range(n))


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    fixed: dict = field(default_factory=dict)
    mode: str = "both"
    n_trials: int = 100_000
    seed: int = 0
    series: str = ""
    with_rates: bool = False
    with_oma: bool = False
    psl_mode: str = "paper"
    mos_floor: bool = False
    record_timing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        problems = []
        if self.axis not in AXES:
            problems.append(f"axis: unknown axis {self.axis!r}")
        if self.mode not in MODES:
            problems.append(f"mode: unknown mode {self.mode!r}")
        if not self.values:
            problems.append("values: empty sweep")
        elif any(b <= a for a, b in zip(self.values, self.values[1:])):
            problems.append("values: not strictly increasing")
        if self.mode != "analytic" and self.n_trials < 100:
            problems.append("n_trials: fewer than 100 trials")
        if problems:
            raise ConfigError(problems)

    @property
    def uses_sim(self):
        return self.mode in ("sim", "both")

    @property
    def uses_analytic(self):
        return self.mode in ("analytic", "both")


class ResultTable:
    """Ordered sweep rows with a fixed column set."""

    columns = COLUMNS

    def __init__(self, rows=None):
        self.rows: list[dict] = []
        for r in rows or ():
            self.append(r)

    def append(self, row: dict) -> None:
        unknown = set(row) - set(COLUMNS)
        if unknown:
            raise KeyError(f"unknown columns {sorted(unknown)}")
        self.rows.append({c: row.get(c) for c in COLUMNS})

    def extend(self, other: "ResultTable") -> None:
        self.rows.extend(other.rows)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def column(self, name, series=None) -> np.ndarray:
        vals = [r[name] for r in self.rows if series is None or r["series"] == series]
        return np.array([np.nan if v is None or v == "" else v for v in vals], dtype=float)

    @property
    def series_names(self) -> list[str]:
        out = []
        for r in self.rows:
            if r["series"] not in out:
                out.append(r["series"])
        return out

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([format_cell(r[c]) for c in COLUMNS])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8", newline="")
        return text

    @classmethod
    def read_csv(cls, path) -> "ResultTable":
        with Path(path).open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != COLUMNS:
                raise ValueError("CSV header does not match the result schema")
            rows = []
            for raw in reader:
                row = {}
                for c, v in raw.items():
                    if c in ("series", "axis", "status"):
                        row[c] = v
                    else:
                        row[c] = None if v == "" else float(v)
                rows.append(row)
        return cls(rows)


def format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return ""
        return repr(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


# --- per-point evaluation ----------------------------------------------------


def _point_configs(spec: SweepSpec, value: float, cfg: NetworkConfig, noma: NomaConfig):
    noma = replace(noma, **{spec.axis: value})
    check(cfg, noma)
    return noma


def _analytic_point(args):
    cfg, noma, spec = args
    out = {}
    model = analytic.CoverageModel(cfg)
    pl = analytic.coverage_pl(model, noma)
    both = analytic.coverage_both_layers(model, noma, mode=spec.psl_mode)
    out.update(
        p_pl_analytic=float(pl.value), p_pl_analytic_err=float(pl.error),
        p_psl_analytic=float(both.value), p_psl_analytic_err=float(both.error),
    )
    shares = analytic.case_probabilities(model)
    out.update({f"case{k + 1}_share_analytic": float(shares[k]) for k in range(3)})
    curve = metrics.MosCurve.from_noma(noma)
    if spec.with_rates:
        out["avg_rate_noma_analytic"] = float(metrics.avg_rate_analytic(cfg, noma, mode=spec.psl_mode)[0])
        out["avg_mos_noma_analytic"] = float(metrics.avg_mos(
            min(out["p_pl_analytic"], 1.0), min(out["p_psl_analytic"], out["p_pl_analytic"]), noma, curve, floor=spec.mos_floor))
    if spec.with_oma:
        rate, mos_value = _oma_analytic(cfg, noma.as_oma(), curve, spec.mos_floor)
        out["avg_rate_oma_analytic"] = rate
        out["avg_mos_oma_analytic"] = mos_value
    return out


@lru_cache(maxsize=64)
def _oma_analytic(cfg, oma, curve, floor):
    # every alpha_p series shares the same OMA curve
    res = metrics.oma_baseline(cfg, oma, "analytic", floor=floor)
    return float(res["avg_rate"]), float(metrics.avg_mos(res["coverage"], 0.0, oma, curve, floor=floor))


def _mos_samples(outcome, noma: NomaConfig, curve, floor):
    lo = metrics.mos(noma.rate_pl, curve)
    hi = metrics.mos(noma.rate_pl + noma.rate_sl, curve)
    pl_only = outcome.pl_ok & ~outcome.sl_ok
    base = 1.0 if floor else 0.0
    return np.where(outcome.sl_ok, hi, np.where(pl_only, lo, base))


def _half_width(x):
    return simulator.CoverageEstimate.from_samples(x).half_width_95


def _sim_point(stats: simulator.LinkStats, noma: NomaConfig, spec: SweepSpec):
    res = simulator.evaluate(stats, noma)
    curve = metrics.MosCurve.from_noma(noma)
    out = {
        "p_pl_sim": res.p_pl.value, "p_pl_sim_ci": res.p_pl.half_width_95,
        "p_psl_sim": res.p_psl.value, "p_psl_sim_ci": res.p_psl.half_width_95,
    }
    out.update({f"case{k + 1}_share_sim": res.case_shares[k].value for k in range(3)})
    rate = res.rate_samples
    mos_n = _mos_samples(res.outcomes, noma, curve, spec.mos_floor)
    out.update(
        avg_rate_noma_sim=float(rate.mean()), avg_rate_noma_sim_ci=_half_width(rate),
        avg_mos_noma_sim=float(mos_n.mean()), avg_mos_noma_sim_ci=_half_width(mos_n),
    )
    if spec.with_oma:
        oma = noma.as_oma()
        ores = simulator.evaluate(stats, oma)
        mos_o = _mos_samples(ores.outcomes, oma, curve, spec.mos_floor)
        out.update(
            avg_rate_oma_sim=float(ores.rate_samples.mean()), avg_rate_oma_sim_ci=_half_width(ores.rate_samples),
            avg_mos_oma_sim=float(mos_o.mean()), avg_mos_oma_sim_ci=_half_width(mos_o),
            # same trials for both schemes, so the paired difference is tight
            rate_gain_sim_ci=_half_width(rate - ores.rate_samples),
            mos_gain_sim_ci=_half_width(mos_n - mos_o),
        )
    return out


def run_sweep(spec: SweepSpec, cfg: NetworkConfig | None = None, noma: NomaConfig | None = None,
              n_jobs: int = 1, sink=None) -> ResultTable:
    """Evaluate one row per axis value, in axis order.

    ``sink`` (a writable text stream) receives each CSV row as soon as it is
    ready.  A point that raises is recorded with ``status`` set to the error
    message and the sweep moves on.
    """
    if cfg is None or noma is None:
        d_cfg, d_noma = load_config(overrides=spec.fixed)
        cfg = cfg or d_cfg
        noma = noma or d_noma
    stats = simulator.sample_link_stats(cfg, spec.n_trials, spec.seed, n_jobs) if spec.uses_sim else None

    points = []
    for v in spec.values:
        try:
            points.append((_point_configs(spec, v, cfg, noma), None))
        except (ConfigError, ValueError) as exc:
            points.append((None, str(exc)))

    jobs = [(k, (cfg, p, spec)) for k, (p, err) in enumerate(points) if err is None and spec.uses_analytic]
    analytic_iter = _iter_analytic(jobs, n_jobs)
    pending = {}

    table = ResultTable()
    writer = csv.writer(sink, lineterminator="\n") if sink is not None else None
    for k, (v, (p, err)) in enumerate(zip(spec.values, points)):
        t0 = time.perf_counter()
        row = {"series": spec.series, "axis": spec.axis, "axis_value": v, "status": "ok"}
        source = p or replace(noma, **{spec.axis: v})
        row.update(alpha_p=source.alpha_p, rate_pl=source.rate_pl, rate_sl=source.rate_sl)
        a_ms = 0.0
        if err is not None:
            row["status"] = f"error: {err}"
        else:
            if spec.uses_analytic:
                while k not in pending:
                    j, res = next(analytic_iter)
                    pending[j] = res
                a_out = pending.pop(k)
                if isinstance(a_out, Exception):
                    row["status"] = f"error: {type(a_out).__name__}: {a_out}"
                else:
                    a_ms = a_out.pop("_ms")
                    row.update(a_out)
            if stats is not None:
                try:
                    row.update(_sim_point(stats, p, spec))
                except Exception as exc:  # noqa: BLE001 - recorded in-row
                    row["status"] = f"error: {type(exc).__name__}: {exc}"
        if spec.record_timing:
            row["runtime_ms"] = 1000.0 * (time.perf_counter() - t0) + a_ms
        table.append(row)
        log.info("%s %s=%g done (%d/%d)", spec.series or "sweep", spec.axis, v, k + 1, len(points))
        if writer is not None:
            writer.writerow([format_cell(table.rows[-1][c]) for c in COLUMNS])
            sink.flush()
    return table


def _timed_analytic(args):
    t0 = time.perf_counter()
    try:
        out = _analytic_point(args)
    except Exception as exc:  # noqa: BLE001 - recorded in-row
        return exc
    out["_ms"] = 1000.0 * (time.perf_counter() - t0)
    return out


def _iter_analytic(jobs, n_jobs):
    """Yield ``(index, result)`` in submission order."""
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            yield from zip((k for k, _ in jobs), pool.map(_timed_analytic, [a for _, a in jobs]))
    else:
        for k, a in jobs:
            yield k, _timed_analytic(a)


# --- figures -----------------------------------------------------------------


@dataclass
class FigureRun:
    fig_id: int
    table: ResultTable
    checks: list  # (name, passed, gated, detail)

    @property
    def failed(self):
        return [c for c in self.checks if c[2] and not c[1]]


def figure_sweeps(fig_id: int, base: dict | None = None, mode="both", n_trials=100_000, seed=0,
                  alpha_set=None, psl_mode="paper", mos_floor=False, record_timing=False) -> list[SweepSpec]:
    base = dict(base or {})
    common = dict(mode=mode, n_trials=n_trials, seed=seed, psl_mode=psl_mode, mos_floor=mos_floor,
                  record_timing=record_timing)
    if fig_id == 2:
        alphas = alpha_set or FIG2_ALPHAS
        return [SweepSpec("rate_pl", _grid(0.1, 1.0, 0.1), {**base, "alpha_p": a}, series=f"alpha_p={a:g}", **common)
                for a in alphas]
    if fig_id == 3:
        return [SweepSpec("alpha_p", _grid(0.5, 0.95, 0.05), {**base, "rate_pl": 0.1}, series="rate_pl=0.1", **common)]
    if fig_id in (4, 5):
        alphas = alpha_set or FIG45_ALPHAS
        return [SweepSpec("rate_sl", _grid(0.1, 0.8, 0.1), {**base, "alpha_p": a, "rate_pl": 0.1},
                          series=f"alpha_p={a:g}", with_rates=True, with_oma=True, **common)
                for a in alphas]
    raise ValueError(f"unknown figure {fig_id!r}; expected one of 2, 3, 4, 5")


def figure_checks(fig_id: int, table: ResultTable) -> list:
    checks = []
    if fig_id == 2:
        for s in table.series_names:
            a = table.column("p_pl_analytic", s)
            if not np.all(np.isnan(a)):
                ok = bool(np.all(np.diff(a) <= 1e-9))
                checks.append((f"{s}: analytic PL coverage non-increasing in rate_pl", ok, True, ""))
            sim = table.column("p_pl_sim", s)
            if not (np.all(np.isnan(a)) or np.all(np.isnan(sim))):
                tol = np.maximum(COVERAGE_TOL, table.column("p_pl_sim_ci", s))
                gap = np.abs(a - sim)
                checks.append((f"{s}: |analytic - sim| <= max(0.03, CI)", bool(np.all(gap <= tol)), True,
                               f"max gap {np.nanmax(gap):.4f}"))
    elif fig_id == 3:
        a = table.column("p_psl_analytic")
        if not np.all(np.isnan(a)):
            checks.append(("analytic both-layer coverage non-increasing in alpha_p",
                           bool(np.all(np.diff(a) <= 1e-9)), True, ""))
    elif fig_id in (4, 5):
        key = "rate" if fig_id == 4 else "mos"
        for s in table.series_names:
            noma = table.column(f"avg_{key}_noma_sim", s)
            if np.all(np.isnan(noma)):
                continue
            oma = table.column(f"avg_{key}_oma_sim", s)
            hw = table.column(f"{key}_gain_sim_ci", s)
            ok = bool(np.all(noma - oma >= -2 * hw))
            checks.append((f"{s}: NOMA {key} >= OMA within 2 CI", ok, True,
                           f"min gain {np.nanmin(noma - oma):+.4f}"))
        if fig_id == 4:
            checks.append(_crossover(table))
    return checks


def _crossover(table: ResultTable):
    """The alpha_p = 0.5 curve leads for small R_sl and trails for large R_sl."""
    name = "alpha_p=0.5 rate above alpha_p=0.9 for R_sl <= 0.3, below for R_sl >= 0.4"
    lo, hi = "alpha_p=0.5", "alpha_p=0.9"
    if lo not in table.series_names or hi not in table.series_names:
        return (name, False, False, "series missing")
    col = "avg_rate_noma_sim" if not np.all(np.isnan(table.column("avg_rate_noma_sim", lo))) else "avg_rate_noma_analytic"
    r = table.column("axis_value", lo)
    a, b = table.column(col, lo), table.column(col, hi)
    early = r <= 0.3 + 1e-9
    ok = bool(np.all(a[early] > b[early]) and np.all(a[~early] < b[~early]))
    return (name, ok, False, f"{col}: diff {np.round(a - b, 4).tolist()}")


def run_figure(fig_id: int, overrides: dict | None = None, mode="both", n_trials=100_000, seed=0,
               alpha_set=None, out_dir=None, n_jobs=1, psl_mode="paper", mos_floor=False,
               config_path=None, record_timing=False) -> FigureRun:
    """Run every sweep behind figure ``fig_id`` and write CSV plus plot script."""
    sweeps = figure_sweeps(fig_id, overrides, mode, n_trials, seed, alpha_set, psl_mode, mos_floor, record_timing)
    out_path = None
    sink = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        out_path = out_dir / f"fig{fig_id}.csv"
        sink = out_path.open("w", encoding="utf-8", newline="")
        sink.write(",".join(COLUMNS) + "\n")
    table = ResultTable()
    try:
        for sw in sweeps:
            cfg, noma = load_config(config_path, sw.fixed)
            table.extend(run_sweep(sw, cfg, noma, n_jobs=n_jobs, sink=sink))
    finally:
        if sink is not None:
            sink.close()
    if out_path is not None:
        # rewrite in one go so the file is canonical even after partial flushes
        table.to_csv(out_path)
        (out_dir / f"fig{fig_id}.plot.py").write_text(plot_script(fig_id, out_path.name), encoding="utf-8", newline="")
    return FigureRun(fig_id, table, figure_checks(fig_id, table))


_PLOT_TEMPLATE = '''# Plot script for {csv}; needs pandas and matplotlib.
import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv("{csv}")
fig, ax = plt.subplots()
for name, g in df.groupby("series", sort=False):
{body}
ax.set_xlabel("{xlabel}")
ax.set_ylabel("{ylabel}")
ax.legend()
fig.savefig("{png}", dpi=150)
'''


def plot_script(fig_id: int, csv_name: str) -> str:
    x = "axis_value"
    if fig_id in (2, 3):
        col = "p_pl" if fig_id == 2 else "p_psl"
        body = (
            f'    ax.plot(g["{x}"], g["{col}_analytic"], "-", label=name + " analytic")\n'
            f'    ax.plot(g["{x}"], g["{col}_sim"], "o", label=name + " sim")'
        )
        xlabel = "R_pl (bit/s/Hz)" if fig_id == 2 else "alpha_p"
        ylabel = "PL coverage probability" if fig_id == 2 else "both-layer coverage probability"
    else:
        key = "rate" if fig_id == 4 else "mos"
        body = (
            f'    ax.plot(g["{x}"], g["avg_{key}_noma_sim"], "-o", label="NOMA " + name)\n'
            f'    ax.plot(g["{x}"], g["avg_{key}_oma_sim"], "--", color="k", label="OMA" if name == df["series"].iloc[0] else None)'
        )
        xlabel = "R_sl (bit/s/Hz)"
        ylabel = "average rate (bit/s/Hz)" if fig_id == 4 else "average MOS"
    png = csv_name.rsplit(".", 1)[0] + ".png"
    return _PLOT_TEMPLATE.format(csv=csv_name, body=body, xlabel=xlabel, ylabel=ylabel, png=png)


# --- command line ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nomahet", description="NOMA multicast coverage, rate and QoE in a two-tier network.")
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--fig", type=int, choices=(2, 3, 4, 5), help="reproduce one figure's sweeps")
    p.add_argument("--axis", choices=AXES, help="sweep axis for a custom sweep")
    p.add_argument("--values", type=float, nargs="+", help="sweep values for a custom sweep")
    p.add_argument("--alpha-p", type=float)
    p.add_argument("--rate-pl", type=float)
    p.add_argument("--rate-sl", type=float)
    p.add_argument("--alpha-p-set", type=float, nargs="+", help="alpha_p series for figures 2, 4 and 5")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="any configuration key")
    p.add_argument("--mode", choices=MODES, default="both")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--psl-mode", choices=analytic.PSL_MODES, default="paper")
    p.add_argument("--mos-floor", action="store_true", help="score uncovered users with MOS 1")
    p.add_argument("--timing", action="store_true", help="fill runtime_ms (makes the CSV non-reproducible)")
    p.add_argument("--out-dir", default=None, help=f"output directory (default ${OUT_DIR_ENV} or ./results)")
    p.add_argument("--dump-config", action="store_true", help="print the effective configuration and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _overrides(args) -> dict:
    out = {}
    for item in args.set:
        if "=" not in item:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    for name in ("alpha_p", "rate_pl", "rate_sl"):
        v = getattr(args, name)
        if v is not None:
            out[name] = v
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out_dir = Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or "results")
    overrides = _overrides(args)
    try:
        cfg, noma = load_config(args.config, overrides)
        check(cfg, noma)
    except (ConfigError, KeyError, ValueError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    if args.dump_config:
        from .config import dump_config
        sys.stdout.write(dump_config(cfg, noma))
        return 0

    if args.fig is not None:
        if args.fig == 3 and args.alpha_p_set:
            print("--alpha-p-set does not apply to figure 3", file=sys.stderr)
        # figure axes and series values win over single-value flags
        for key in ("alpha_p",) if args.fig != 3 else ("alpha_p", "rate_pl"):
            overrides.pop(key, None)
        overrides.pop(FIGURE_AXES[args.fig], None)
        try:
            run = run_figure(args.fig, overrides, args.mode, args.trials, args.seed, args.alpha_p_set, out_dir,
                             args.jobs, args.psl_mode, args.mos_floor, args.config, args.timing)
        except (ConfigError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        for name, ok, gated, detail in run.checks:
            tag = "PASS" if ok else ("FAIL" if gated else "NOTE")
            print(f"{tag} fig{args.fig}: {name}" + (f" ({detail})" if detail else ""))
        print(f"wrote {out_dir / f'fig{args.fig}.csv'}")
        return 1 if run.failed else 0

    if args.axis is None or not args.values:
        print("give --fig, or --axis with --values", file=sys.stderr)
        return 2
    overrides.pop(args.axis, None)
    try:
        spec = SweepSpec(args.axis, tuple(args.values), overrides, args.mode, args.trials, args.seed,
                         with_rates=True, with_oma=True, psl_mode=args.psl_mode, mos_floor=args.mos_floor,
                         record_timing=args.timing)
    except ConfigError as exc:
        print(f"invalid sweep: {exc}", file=sys.stderr)
        return 2
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "sweep.csv"
    table = run_sweep(spec, cfg, noma, n_jobs=args.jobs)
    table.to_csv(path)
    print(f"wrote {path}")
    return 0 if all(r["status"] == "ok" for r in table) else 1


if __name__ == "__main__":
    raise SystemExit(main())
