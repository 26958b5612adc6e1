"""Command-line front end: ``rgvexp {exponents,tails,simulate,lemmas,figures}``.

Every command takes its settings from an optional JSON config (``--config`` or
a named preset) overlaid with explicit flags, and writes CSV/JSON artifacts.
Rates, thresholds and exponents are in bits unless ``--nats`` is given.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import io as rio
from ._validation import (
    ConstructionInfeasibleError,
    InstanceTooLargeError,
    InvalidParameterError,
    as_distribution,
)
from .channel import Channel, DecodingMetric, make_bsc, make_z_channel
from .distance import DistanceSpec
from .exponents import (
    ExponentProblem,
    e0_min,
    expurgated,
    expurgated_rgv,
    random_coding,
    trc_cc,
    trc_rgv,
)

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4

EXPONENT_COLUMNS = ["rate", "E_rce_rgv", "E_trc_rgv", "E_ex", "E_trc_cc", "E_0_min", "E_r"]
TAIL_COLUMNS = ["e0", "elt_ub", "elt_lb", "eut_ub", "eut_lb", "flags"]
CURVES = {
    "trc_rgv": lambda p: trc_rgv(p, check=False),
    "trc_cc": trc_cc,
    "expurgated": expurgated,
    "expurgated_rgv": expurgated_rgv,
    "e0_min": e0_min,
    "random_coding": random_coding,
}
PRESETS = ("fig1", "fig2", "fig3", "zchannel-sim", "zchannel-lemmas")


class ConfigError(InvalidParameterError):
    pass


# ---- configuration ---------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    command: str
    channel: dict = field(default_factory=lambda: {"z": 0.001})
    composition: tuple = (0.5, 0.5)
    metric: str = "likelihood"
    skew: float = math.inf
    distance: str = "neg-mutual-information"
    delta: float | None = None
    delta_rule: str | None = "neg-rate"
    slack: float = 0.0
    rates: tuple = ()
    rate: float | None = None
    e0: tuple = ()
    n_list: tuple = (8,)
    trials: int = 10000
    replications: int = 100
    seed: int = 0
    max_draws: int = 10**6
    nats: bool = False
    grid_resolution: int = 64
    conditions: bool = True
    curve: str | None = None
    output: str | None = None
    jobs: int = 1

    @property
    def base(self):
        return "e" if self.nats else 2

    def load_channel(self) -> Channel:
        ch = self.channel
        if not isinstance(ch, dict):
            raise ConfigError(f"channel must be an object, got {ch!r}")
        if "path" in ch:
            try:
                return Channel.load(ch["path"])
            except OSError as exc:
                raise OSError(f"cannot read channel file {ch['path']}: {exc}") from exc
        if "z" in ch:
            return make_z_channel(float(ch["z"]))
        if "bsc" in ch:
            return make_bsc(float(ch["bsc"]))
        if "rows" in ch:
            return Channel.from_dict(ch)
        raise ConfigError(f"unrecognised channel description {ch!r}")

    def make_metric(self, channel: Channel) -> DecodingMetric:
        kind = {"ml": "likelihood", "mmi": "mutual-information"}.get(self.metric, self.metric)
        skew = math.inf if self.metric in ("ml", "mmi") else self.skew
        return DecodingMetric(kind, skew)

    def distance_at(self, rate: float, channel: Channel) -> DistanceSpec:
        if self.distance in (None, "none", "cc"):
            return DistanceSpec.unconstrained()
        ch = channel if self.distance == "bhattacharyya" else None
        if self.delta_rule == "neg-rate":
            th = -(rate + 2 * self.slack)
        elif self.delta is not None:
            th = float(self.delta)
        else:
            raise ConfigError("distance given without --delta or --delta-rule")
        return DistanceSpec(self.distance, th, channel=ch)

    def problem(self, rate: float) -> ExponentProblem:
        ch = self.load_channel()
        return ExponentProblem(ch, tuple(self.composition), self.make_metric(ch), rate,
                               self.distance_at(rate, ch), grid_resolution=self.grid_resolution,
                               base=self.base, slack=self.slack)


def _grid(spec, name) -> tuple:
    """Inclusive grid from a list or ``{"start","stop","step"}``."""
    if spec is None:
        return ()
    if isinstance(spec, dict):
        try:
            start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{name} grid needs start/stop/step: {exc}") from exc
        if not step > 0:
            raise ConfigError(f"{name} grid step must be positive")
        if stop < start:
            raise ConfigError(f"{name} grid is empty (stop < start)")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 12) for i in range(count))
    vals = tuple(float(v) for v in spec)
    return vals


def _parse_list(text, cast=float):
    return [cast(t) for t in str(text).replace(";", ",").split(",") if t.strip()]


def _skew(v):
    if isinstance(v, str) and v.lower() in ("inf", "infinity"):
        return math.inf
    return float(v)


def config_from_dict(doc: dict) -> RunConfig:
    doc = dict(doc)
    known = {f.name for f in fields(RunConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "command" not in doc:
        raise ConfigError("config has no command")
    for key in ("rates", "e0"):
        if key in doc:
            doc[key] = _grid(doc[key], key)
    if "composition" in doc:
        doc["composition"] = tuple(float(v) for v in doc["composition"])
    if "n_list" in doc:
        doc["n_list"] = tuple(int(v) for v in doc["n_list"])
    if "skew" in doc:
        doc["skew"] = _skew(doc["skew"])
    try:
        return RunConfig(**doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("rgvexp").joinpath("presets", f"{name}.json").read_text("utf-8")
    return json.loads(text)


def _read_config_file(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


def _overrides(args) -> dict:
    out = {}
    if getattr(args, "channel", None):
        out["channel"] = {"path": args.channel}
    if getattr(args, "z_channel", None) is not None:
        out["channel"] = {"z": args.z_channel}
    if getattr(args, "bsc", None) is not None:
        out["channel"] = {"bsc": args.bsc}
    simple = {
        "composition": lambda v: _parse_list(v),
        "metric": str,
        "skew": _skew,
        "distance": str,
        "delta": float,
        "slack": float,
        "rate": float,
        "trials": int,
        "replications": int,
        "seed": int,
        "max_draws": int,
        "grid_resolution": int,
        "curve": str,
        "output": str,
        "jobs": int,
    }
    for key, cast in simple.items():
        v = getattr(args, key, None)
        if v is not None:
            out[key] = cast(v)
    if getattr(args, "delta", None) is not None:
        out["delta_rule"] = None
    if getattr(args, "delta_rule", None) is not None:
        out["delta_rule"] = None if args.delta_rule == "none" else args.delta_rule
    if getattr(args, "rates", None):
        out["rates"] = {"start": args.rates[0], "stop": args.rates[1], "step": args.rates[2]}
    if getattr(args, "rate_list", None):
        out["rates"] = _parse_list(args.rate_list)
    if getattr(args, "e0", None):
        out["e0"] = {"start": args.e0[0], "stop": args.e0[1], "step": args.e0[2]}
    if getattr(args, "e0_list", None):
        out["e0"] = _parse_list(args.e0_list)
    if getattr(args, "n_list", None):
        out["n_list"] = _parse_list(args.n_list, int)
    if getattr(args, "nats", False):
        out["nats"] = True
    if getattr(args, "skip_conditions", False):
        out["conditions"] = False
    return out


def build_config(command: str, args) -> RunConfig:
    doc = {"command": command}
    if getattr(args, "config", None):
        base = _read_config_file(args.config)
        base.pop("command", None)
        doc.update(base)
    doc.update(_overrides(args))
    try:
        cfg = config_from_dict(doc)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    as_distribution(cfg.composition, "composition")
    cfg.load_channel()
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    if cfg.command == "exponents":
        if not cfg.rates:
            raise ConfigError("empty rate grid")
        if any(r < 0 for r in cfg.rates):
            raise ConfigError("rates must be nonnegative")
        if cfg.curve is not None and cfg.curve not in CURVES:
            raise ConfigError(f"unknown curve {cfg.curve!r}; choose from {sorted(CURVES)}")
    if cfg.command == "tails":
        if cfg.rate is None:
            raise ConfigError("tails needs --rate")
        if not cfg.e0:
            raise ConfigError("empty E0 grid")
    if cfg.command in ("simulate", "lemmas"):
        if cfg.rate is None:
            raise ConfigError(f"{cfg.command} needs --rate")
        if not cfg.n_list:
            raise ConfigError("empty blocklength list")
        if cfg.replications < 1:
            raise ConfigError("replications must be >= 1")
        if cfg.max_draws < 1:
            raise ConfigError("max_draws must be >= 1")
        if cfg.command == "simulate" and cfg.trials < 1:
            raise ConfigError("trials must be >= 1")


# ---- workers (module level so that process pools can pickle them) ------------

def _map(fn, items, jobs):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _exponent_row(task):
    cfg, rate = task
    p = cfg.problem(rate)
    cc = p.with_distance(DistanceSpec.unconstrained())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        e_trc = trc_rgv(p, check=False).value
    return [
        rate,
        expurgated_rgv(p).value,
        e_trc,
        expurgated(p).value,
        trc_cc(p).value,
        e0_min(cc).value,
        random_coding(p).value,
    ]


def _curve_row(task):
    cfg, rate = task
    v = CURVES[cfg.curve](cfg.problem(rate))
    return [rate, v.value, v.diagnostics.get("argmin_I", math.nan), v.feasible]


def _tail_row(task):
    from .tails import (
        TailProblem,
        condition_flags,
        lower_tail_lower,
        lower_tail_upper,
        tail_condition_report,
        upper_tail_lower,
        upper_tail_upper,
    )

    cfg, e0 = task
    tp = TailProblem(cfg.problem(cfg.rate), e0)
    vals = [lower_tail_upper(tp), lower_tail_lower(tp), upper_tail_upper(tp), upper_tail_lower(tp)]
    flags = []
    for name, v in zip(("elt_ub", "elt_lb", "eut_ub", "eut_lb"), vals):
        flags += [f"{name}:{f}" for f in v.flags]
    if cfg.conditions:
        flags.append(condition_flags(tail_condition_report(tp)))
    return [e0] + [v.value for v in vals] + [";".join(flags)]


def run_exponents(cfg: RunConfig) -> list[list]:
    if cfg.curve:
        header = ["rate", "value", "argmin_I", "feasible"]
        rows = _map(_curve_row, [(cfg, r) for r in cfg.rates], cfg.jobs)
    else:
        header = EXPONENT_COLUMNS
        rows = _map(_exponent_row, [(cfg, r) for r in cfg.rates], cfg.jobs)
    rio.write_csv(cfg.output, header, rows)
    return rows


def run_tails(cfg: RunConfig) -> list[list]:
    rows = _map(_tail_row, [(cfg, e) for e in cfg.e0], cfg.jobs)
    rio.write_csv(cfg.output, TAIL_COLUMNS, rows)
    return rows


# ---- simulation ---------------------------------------------------------------

def _sim_row(task):
    from .rgv import (MAX_OUTPUTS, RgvParams, derive_seed, exact_error_prob, generate_codebook,
                      mc_error_prob)

    cfg, n, rep = task
    ch = cfg.load_channel()
    seed = derive_seed(cfg.seed, n, rep)
    params = RgvParams(n, cfg.rate, _n_type(cfg.composition, n), cfg.distance_at(cfg.rate, ch),
                       cfg.slack, seed, cfg.base)
    book = generate_codebook(params, cfg.max_draws)
    metric = cfg.make_metric(ch)
    if float(ch.output_alphabet_size) ** n <= MAX_OUTPUTS:
        pe, method, half = exact_error_prob(book, ch, metric), "exact", 0.0
    else:
        est = mc_error_prob(book, ch, metric, cfg.trials, seed=seed)
        pe, method, half = est.estimate, "mc", est.half_width
    zero = pe <= 0.0
    unit = 1.0 if cfg.nats else math.log(2)
    expo = math.nan if zero else -math.log(pe) / (n * unit)
    return [n, rep, seed, params.M, pe, expo, method, half, zero]


def _n_type(q, n):
    counts = np.rint(np.asarray(q, dtype=float) * n)
    if abs(counts.sum() - n) > 0.5 or np.max(np.abs(counts / n - np.asarray(q))) > 1e-9:
        raise ConfigError(f"composition {q} is not an n-type for n={n}")
    return tuple(counts / n)


SIM_COLUMNS = ["n", "replication", "seed", "M", "pe", "exponent", "method", "half_width",
               "zero_error"]


def summarize(rows) -> dict:
    out = {}
    for n in sorted({r[0] for r in rows}):
        sub = [r for r in rows if r[0] == n]
        vals = np.array([r[5] for r in sub if not r[8]], dtype=float)
        entry = {"replications": len(sub), "zero_error": sum(1 for r in sub if r[8]),
                 "methods": sorted({r[6] for r in sub})}
        if vals.size:
            entry.update(
                mean=float(vals.mean()),
                variance=float(vals.var(ddof=1)) if vals.size > 1 else 0.0,
                q10=float(np.quantile(vals, 0.1)),
                median=float(np.quantile(vals, 0.5)),
                q90=float(np.quantile(vals, 0.9)),
            )
        else:
            entry.update(mean=None, variance=None, q10=None, median=None, q90=None)
        out[str(n)] = entry
    return out


def _summary_path(output):
    if output is None or output == "-":
        return None
    p = Path(output)
    return p.with_name(p.stem + "_summary.json")


def run_simulate(cfg: RunConfig) -> dict:
    tasks = [(cfg, n, r) for n in cfg.n_list for r in range(cfg.replications)]
    rows = _map(_sim_row, tasks, cfg.jobs)
    rio.write_csv(cfg.output, SIM_COLUMNS, rows)
    summary = {"config": _cfg_doc(cfg), "by_n": summarize(rows)}
    path = _summary_path(cfg.output)
    if path is not None:
        rio.write_json(path, summary)
    return summary


def run_lemmas(cfg: RunConfig) -> dict:
    from .rgv import RgvParams, lemma_checks

    ch = cfg.load_channel()
    reports = {}
    for n in cfg.n_list:
        params = RgvParams(n, cfg.rate, _n_type(cfg.composition, n), cfg.distance_at(cfg.rate, ch),
                           cfg.slack, cfg.seed, cfg.base)
        reports[str(n)] = lemma_checks(params, cfg.replications)
    doc = {"config": _cfg_doc(cfg), "reports": reports}
    rio.write_json(cfg.output, doc)
    return doc


def _cfg_doc(cfg: RunConfig) -> dict:
    doc = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    doc.pop("output")
    doc.pop("jobs")
    return doc


RUNNERS = {"exponents": run_exponents, "tails": run_tails, "simulate": run_simulate,
           "lemmas": run_lemmas}


def run_figures(name: str, outdir, jobs=1) -> list[Path]:
    preset = load_preset(name)
    outdir = Path(outdir)
    written = []
    for run in preset["runs"]:
        doc = dict(run["config"])
        doc["output"] = str(outdir / run["output"])
        doc["jobs"] = jobs
        cfg = config_from_dict(doc)
        _validate(cfg)
        RUNNERS[cfg.command](cfg)
        written.append(Path(doc["output"]))
    return written


# ---- argument parsing ------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its entries")
    p.add_argument("--channel", help="channel JSON file {inputs, outputs, rows}")
    p.add_argument("--z-channel", type=float, help="use a z-channel with this crossover")
    p.add_argument("--bsc", type=float, help="use a binary symmetric channel")
    p.add_argument("--composition", help="input composition, e.g. 0.5,0.5")
    p.add_argument("--metric", help="likelihood | mutual-information | ml | mmi")
    p.add_argument("--skew", help="decoder skew (inf for argmax decoding)")
    p.add_argument("--distance", help="neg-mutual-information | hamming | bhattacharyya | none")
    p.add_argument("--delta", type=float, help="fixed distance threshold")
    p.add_argument("--delta-rule", choices=["neg-rate", "none"],
                   help="neg-rate rebinds the threshold to -(R + 2 slack) at each rate")
    p.add_argument("--slack", type=float, help="construction slack delta")
    p.add_argument("--nats", action="store_true", help="rates and exponents in nats")
    p.add_argument("--grid-resolution", type=int)
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--output", "-o", help="output path (default stdout)")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rgvexp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exponents", help="exponent curves over a rate grid")
    _common(p)
    p.add_argument("--rates", nargs=3, type=float, metavar=("START", "STOP", "STEP"))
    p.add_argument("--rate-list", help="comma-separated rates")
    p.add_argument("--curve", help=f"single curve: {', '.join(sorted(CURVES))}")

    p = sub.add_parser("tails", help="tail exponents over an E0 grid")
    _common(p)
    p.add_argument("--rate", type=float)
    p.add_argument("--e0", nargs=3, type=float, metavar=("START", "STOP", "STEP"))
    p.add_argument("--e0-list", help="comma-separated E0 values")
    p.add_argument("--skip-conditions", action="store_true",
                   help="do not evaluate the technical conditions")

    for name, hlp in (("simulate", "finite-n codebook experiments"),
                      ("lemmas", "ensemble property checks")):
        p = sub.add_parser(name, help=hlp)
        _common(p)
        p.add_argument("--rate", type=float)
        p.add_argument("--n-list", help="comma-separated blocklengths")
        p.add_argument("--replications", type=int)
        p.add_argument("--seed", type=int)
        if name == "simulate":
            p.add_argument("--trials", type=int, help="Monte Carlo trials when exact is too big")
            p.add_argument("--max-draws", type=int, help="rejection budget per codeword")

    p = sub.add_parser("figures", help="reproduce a shipped preset")
    p.add_argument("preset", choices=PRESETS)
    p.add_argument("--output-dir", "-d", default=".")
    p.add_argument("--jobs", type=int, default=1)
    return ap


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "figures":
            for path in run_figures(args.preset, args.output_dir, args.jobs):
                print(path)
            return EXIT_OK
        cfg = build_config(args.command, args)
        RUNNERS[cfg.command](cfg)
        return EXIT_OK
    except ConstructionInfeasibleError as exc:
        print(f"rgvexp: construction infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InvalidParameterError, InstanceTooLargeError) as exc:
        print(f"rgvexp: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"rgvexp: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
