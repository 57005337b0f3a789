"""Command-line front end.

Usage::

    cellseg analyze [CONFIG] [--set KEY=VALUE ...] [-o OUT]
    cellseg quantize [CONFIG] --set dist=gamma --set dist.m=1.74 --set dist.s=0.89
    cellseg simulate CONFIG
    cellseg sweep CONFIG --set speedups=1.0,1.05,1.1
    cellseg min-speedup CONFIG
    cellseg gen-traffic CONFIG -o trace.txt

Configuration files hold ``key = value`` lines; ``#`` starts a comment and
list values are comma separated.  Every output starts with the effective
configuration as ``#`` comments followed by a CSV header.
"""
from __future__ import annotations

import argparse
import io
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from . import mg1, quantize, simcore, traffic
from .errors import CellsegError, ParameterError

COMMANDS = ("analyze", "quantize", "simulate", "sweep", "min-speedup", "gen-traffic")

DEFAULTS = {
    "ports": "16",
    "cell_size": "64",
    "speedup": "1.0",
    "islip_iterations": "",
    "merge": "false",
    "merge_timeout_cells": "10",
    "warmup_fraction": "0.1",
    "instability_threshold": "1000",
    "instability_unit": "packets",
    "seed": "1",
    "utilization": "0.99",
    "utilizations": "0.5,0.6,0.7,0.8,0.9,0.93,0.95,0.97,0.99",
    "speedups": "1.0,1.05,1.1",
    "step": "0.01",
    "cap": "2.0",
    "search": "linear",
    "traffic.arrivals": "poisson",
    "traffic.rate": "1.0",
    "traffic.interval": "1.0",
    "traffic.lengths": "bimodal",
    "traffic.mean_length": "500",
    "traffic.length": "64",
    "traffic.dest": "uniform",
    "traffic.sources": "",
    "traffic.packets_per_source": "5000",
    "traffic.trace": "",
    "L": "100,500,1000",
    "S": "64",
    "rho_list": "",
    "dist": "exponential",
    "dist.rate": "0.5",
    "dist.w1": "0.5",
    "dist.w2": "0.5",
    "dist.rate1": "1.0",
    "dist.rate2": "2.0",
    "dist.shape": "",
    "dist.scale": "",
    "dist.m": "",
    "dist.s": "",
    "tail_epsilon": "1e-12",
}


class UsageError(CellsegError):
    pass


@dataclass
class RunPlan:
    command: str
    config_path: str | None = None
    overrides: dict = field(default_factory=dict)
    output_path: str | None = None
    verbose: bool = False


def read_config(text):
    """Parse ``key = value`` lines into a dict (values stay strings)."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected 'key = value'")
        key, value = (x.strip() for x in line.split("=", 1))
        if key not in DEFAULTS:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _parser():
    p = argparse.ArgumentParser(prog="cellseg", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("config", nargs="?", help="key = value configuration file")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="override a configuration entry")
    p.add_argument("--seed", type=int, help="override the random seed")
    p.add_argument("-o", "--output", help="output file (default: stdout)")
    p.add_argument("-v", "--verbose", action="store_true", help="progress on stderr")
    return p


def parse_invocation(argv):
    """Validate ``argv`` into a :class:`RunPlan`; usage errors exit with status 2."""
    parser = _parser()
    args = parser.parse_args(argv)
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            parser.error(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (x.strip() for x in item.split("=", 1))
        if key not in DEFAULTS:
            parser.error(f"unknown configuration key {key!r}")
        overrides[key] = value
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    return RunPlan(args.command, args.config, overrides, args.output, args.verbose)


class Config(dict):
    def num(self, key):
        return float(self[key])

    def int(self, key):
        return int(float(self[key]))

    def flag(self, key):
        v = self[key].lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ParameterError(f"{key} must be a boolean, got {self[key]!r}")

    def nums(self, key):
        return [float(x) for x in self[key].split(",") if x.strip()]

    def opt_num(self, key):
        return float(self[key]) if self[key].strip() else None


def effective_config(plan):
    cfg = Config(DEFAULTS)
    if plan.config_path:
        cfg.update(read_config(Path(plan.config_path).read_text()))
    cfg.update(plan.overrides)
    return cfg


def _fmt(x):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return "inf" if math.isinf(x) else f"{x:.6g}"
    return str(x)


def _header(cfg, extra=()):
    lines = [f"# {k} = {v}" for k, v in sorted(cfg.items())]
    lines += [f"# {line}" for line in extra]
    return "\n".join(lines) + "\n"


def _table(columns, rows):
    out = [",".join(columns)]
    out += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def build_dist(cfg):
    kind = cfg["dist"].lower()
    if kind == "exponential":
        return quantize.Exponential(cfg.num("dist.rate"))
    if kind == "erlang2":
        return quantize.Erlang2(cfg.num("dist.rate"))
    if kind == "hyperexp2":
        return quantize.Hyperexp2(cfg.num("dist.w1"), cfg.num("dist.w2"),
                                  cfg.num("dist.rate1"), cfg.num("dist.rate2"))
    if kind == "gamma":
        if cfg["dist.m"].strip():
            shape, scale = quantize.gamma_fit(cfg.num("dist.m"), cfg.num("dist.s"))
        else:
            shape, scale = cfg.num("dist.shape"), cfg.num("dist.scale")
        return quantize.Gamma(shape, scale)
    raise ParameterError(f"unknown distribution {cfg['dist']!r}")


def _closed_form(dist):
    if isinstance(dist, quantize.Exponential):
        return quantize.ceil_exponential_moments(dist.rate)
    if isinstance(dist, quantize.Erlang2):
        return quantize.ceil_erlang2_moments(dist.rate)
    if isinstance(dist, quantize.Hyperexp2):
        return quantize.ceil_hyperexp2_moments(dist.w1, dist.w2, dist.rate1, dist.rate2)
    return None


def cmd_quantize(cfg, log):
    dist = build_dist(cfg)
    pmf = quantize.quantize_general(dist, cfg.num("tail_epsilon"))
    mom = quantize.pmf_moments(pmf)
    extra = [f"distribution = {dist!r}"]
    if isinstance(dist, quantize.Gamma):
        extra += [f"shape = {dist.shape:.6g}", f"scale = {dist.scale:.6g}"]
    rows = [("mean", mom.mean), ("variance", mom.variance), ("tail_mass", pmf.tail_mass),
            ("points", len(pmf))]
    cf = _closed_form(dist)
    if cf is not None:
        rows += [("closed_form_mean", cf.mean), ("closed_form_variance", cf.variance)]
    try:
        h = quantize.heuristic_moments(dist.mean, dist.var)
        rows += [("heuristic_mean", h.mean), ("heuristic_variance", h.variance)]
    except quantize.HeuristicError:
        pass
    body = _table(("quantity", "value"), rows) + "\n" + pmf.to_csv()
    return _header(cfg, extra) + body


def cmd_analyze(cfg, log):
    S = cfg.num("S")
    rhos = cfg.nums("rho_list") or list(mg1.default_rho_grid())
    rows = []
    for L in cfg.nums("L"):
        for r in mg1.segmentation_curve(L, S, rhos):
            rows.append((r.L, r.S, r.rho, r.rho_quantized, r.mean_queue_length,
                         r.required_speedup, r.stable))
    cols = ("L", "S", "rho", "rho_quantized", "mean_queue_length", "speedup", "stable")
    return _header(cfg) + _table(cols, rows)


def switch_config(cfg):
    return simcore.SwitchConfig(
        ports=cfg.int("ports"),
        cell_size=cfg.int("cell_size"),
        speedup=cfg.num("speedup"),
        islip_iterations=int(cfg.opt_num("islip_iterations")) if cfg.opt_num("islip_iterations") else None,
        merge=cfg.flag("merge"),
        merge_timeout_cells=cfg.num("merge_timeout_cells"),
        warmup_fraction=cfg.num("warmup_fraction"),
        instability_threshold=cfg.int("instability_threshold"),
        instability_unit=cfg["instability_unit"],
        seed=cfg.int("seed"),
    )


def synthetic_spec(cfg):
    ports = cfg.int("ports")
    kind = cfg["traffic.lengths"].lower()
    if kind == "bimodal":
        lengths = traffic.BimodalLength()
    elif kind == "exponential":
        lengths = traffic.ExponentialLength(cfg.num("traffic.mean_length"))
    elif kind == "fixed":
        lengths = traffic.FixedLength(cfg.int("traffic.length"))
    else:
        raise ParameterError(f"unknown traffic.lengths {cfg['traffic.lengths']!r}")
    arr = cfg["traffic.arrivals"].lower()
    if arr == "poisson":
        arrivals = traffic.Poisson(cfg.num("traffic.rate"))
    elif arr == "cbr":
        if cfg["traffic.interval"] == "back_to_back":
            if not isinstance(lengths, traffic.FixedLength):
                raise ParameterError("back_to_back CBR needs fixed-length packets")
            arrivals = traffic.CBR(lengths.nbytes / cfg.int("cell_size"))
        else:
            arrivals = traffic.CBR(cfg.num("traffic.interval"))
    else:
        raise ParameterError(f"unknown traffic.arrivals {cfg['traffic.arrivals']!r}")
    dest = cfg["traffic.dest"]
    dest = "uniform" if dest == "uniform" else int(dest)
    sources = tuple(int(x) for x in cfg["traffic.sources"].split(",") if x.strip()) or None
    return traffic.SyntheticSpec(arrivals, lengths, ports, dest, sources)


def workload(cfg):
    ports = cfg.int("ports")
    S = cfg.int("cell_size")
    paths = [p.strip() for p in cfg["traffic.trace"].split(",") if p.strip()]
    if paths:
        if len(paths) == 1:
            pk = traffic.load_trace_split(Path(paths[0]).read_text().splitlines(), ports)
        else:
            pk = traffic.load_trace_files([Path(p).read_text().splitlines() for p in paths], ports)
        return traffic.TraceWorkload(tuple(pk), ports, S)
    return traffic.SyntheticWorkload(synthetic_spec(cfg), cfg.int("traffic.packets_per_source"), S)


SIM_COLUMNS = ("utilization", "speedup", "merge", "mean_queue_length_cells",
               "mean_packets_in_system", "max_voq_cells", "max_port_cells",
               "max_port_packets", "unstable", "padding_overhead_ratio")


def _sim_row(u, s, merge, st):
    return (u, s, merge, st.mean_queue_length_cells, st.mean_packets_in_system,
            st.max_voq_cells, st.max_port_cells, st.max_port_packets, st.unstable,
            st.padding_overhead_ratio)


def cmd_simulate(cfg, log):
    sc = switch_config(cfg)
    u = cfg.num("utilization")
    pk = workload(cfg).packets(u, sc.seed)
    st = simcore.run_simulation(sc, pk)
    log(f"simulated {st.packets_in} packets, {st.slots} slots")
    return _header(cfg) + _table(SIM_COLUMNS, [_sim_row(u, sc.speedup, sc.merge, st)])


def cmd_sweep(cfg, log):
    sc = switch_config(cfg)
    rows = simcore.sweep_utilization(sc, workload(cfg), cfg.nums("utilizations"), cfg.nums("speedups"))
    out = []
    for r in rows:
        log(f"u={r.utilization} s={r.speedup} unstable={r.stats.unstable}")
        out.append(_sim_row(r.utilization, r.speedup, sc.merge, r.stats))
    return _header(cfg) + _table(SIM_COLUMNS, out)


def cmd_min_speedup(cfg, log):
    sc = switch_config(cfg)
    u = cfg.num("utilization")
    best, runs = simcore.find_min_speedup(sc, workload(cfg), u, cfg.num("step"),
                                          cfg.num("cap"), cfg["search"])
    for s in sorted(runs):
        log(f"speedup {s}: unstable={runs[s].unstable}")
    return _header(cfg) + _table(("utilization", "merge", "min_speedup"), [(u, sc.merge, best)])


def cmd_gen_traffic(cfg, log):
    spec = synthetic_spec(cfg)
    pk = traffic.generate_synthetic(spec, cfg.int("seed"), cfg.int("traffic.packets_per_source"))
    by_src = {}
    for p in pk:
        by_src.setdefault(p.src, []).append(p)
    parts = []
    for src in sorted(by_src):
        buf = io.StringIO()
        traffic.write_trace(by_src[src], buf, header=f"input {src}")
        parts.append((src, buf.getvalue()))
    return _header(cfg), parts


def execute(plan, stdout=None, stderr=None):
    """Run a plan; returns the process exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    log = (lambda msg: print(msg, file=stderr)) if plan.verbose else (lambda msg: None)
    try:
        cfg = effective_config(plan)
        handler = {
            "analyze": cmd_analyze,
            "quantize": cmd_quantize,
            "simulate": cmd_simulate,
            "sweep": cmd_sweep,
            "min-speedup": cmd_min_speedup,
            "gen-traffic": cmd_gen_traffic,
        }[plan.command]
        result = handler(cfg, log)
        if plan.command == "gen-traffic":
            header, parts = result
            if plan.output_path is None:
                stdout.write(header + "".join(text for _, text in parts))
            else:
                out = Path(plan.output_path)
                names = [out] if len(parts) == 1 else [
                    out.with_name(f"{out.stem}.{src}{out.suffix}") for src, _ in parts]
                for name, (_, text) in zip(names, parts):
                    _write_atomic(name, header + text)
        elif plan.output_path is None:
            stdout.write(result)
        else:
            _write_atomic(Path(plan.output_path), result)
    except (CellsegError, ValueError, OSError) as exc:
        print(f"cellseg {plan.command}: error: {exc}", file=stderr)
        return 1
    return 0


def _write_atomic(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def main(argv=None):
    plan = parse_invocation(sys.argv[1:] if argv is None else argv)
    return execute(plan)


if __name__ == "__main__":
    sys.exit(main())
