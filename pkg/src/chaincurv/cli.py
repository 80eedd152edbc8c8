"""Command-line interface: ``chaincurv <command> [options]``.

Exit status: 0 when every check passes or is report-only, 1 when an
asserted check fails, 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from . import __version__
from .chain import FiniteChain, parse_zoo_spec
from .chainfile import parse_chain_file
from .curvature import coarse_ricci, diameter_bound_check, lipschitz_contraction_check
from .drift import (
    build_discrete_drift,
    endpoint_law,
    entropy_optimality_check,
    interpolation_scan,
    path_density_check,
    path_relative_entropy,
)
from .errors import InstanceTooLargeError
from .functional import (
    entropy_functional,
    entropy_monotonicity_check,
    heat_apply,
    heat_identity_check,
    lsi_constant,
    mlsi_constant,
    relaxation_time,
)
from .report import InequalityReport, Status
from .transport import relative_entropy, w1
from .verify import (
    conjecture2_report,
    coupling_simulation,
    gaussian_concentration_check,
    onestep_t1_constant,
    peres_tetali_report,
    t1_scan,
    tilted_density,
)

COMMANDS = (
    "curvature", "w1", "t1-scan", "concentration", "coupling-sim", "drift",
    "mlsi", "lsi", "heat", "interp-scan", "report-all",
)
FORMATS = ("table", "csv", "json")
CSV_COLUMNS = ("name", "constant", "worst_ratio", "trials", "status", "witness")
SIG = 12


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    chain_source: str
    seed: int
    laziness: float | None = None
    samples: int | None = None
    trials: int | None = None
    T: float | None = None
    T_grid: list[float] | None = None
    restarts: int | None = None
    format: str = "table"
    out: str | None = None
    options: dict[str, Any] = field(default_factory=dict)

    def to_record(self) -> dict:
        return {k: v for k, v in asdict(self).items()}


@dataclass
class Record:
    """A computed result that is not an inequality check (a value plus details)."""

    name: str
    data: dict

    def to_record(self) -> dict:
        return {"name": self.name, **self.data}


# --- formatting ------------------------------------------------------------------

def _clean(x):
    """Round floats to 12 significant digits; nan -> None, inf -> string."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.{SIG}g}") + 0.0
    if isinstance(x, Status):
        return x.value
    return x


def _fmt(x) -> str:
    x = _clean(x)
    if x is None:
        return "nan"
    if isinstance(x, float):
        return f"{x:.{SIG}g}"
    if isinstance(x, (dict, list)):
        return json.dumps(x, separators=(",", ":"))
    return str(x)


def emit_report(items, config: RunConfig) -> str:
    """Serialize results deterministically in ``config.format``."""
    cfg = _clean(config.to_record())
    if config.format == "json":
        doc = {"config": cfg, "results": [_clean(it.to_record()) for it in items]}
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    if config.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerow(["run_config", "", "", "", "", _fmt(cfg)])
        for it in items:
            if isinstance(it, InequalityReport):
                rec = _clean(it.to_record())
                w.writerow([it.name, _fmt(it.constant), _fmt(it.worst_ratio), it.trials,
                            it.status.value, _fmt(rec["witness"])])
            else:
                w.writerow([it.name, "", "", "", "", _fmt(it.data)])
        return buf.getvalue()
    if config.format != "table":
        raise UsageError(f"unknown format {config.format!r}")
    lines = ["# " + " ".join(f"{k}={_fmt(v)}" for k, v in cfg.items() if v not in (None, {}))]
    for it in items:
        lines.append("")
        if isinstance(it, InequalityReport):
            lines.append(f"[{it.status.value}] {it.name}")
            lines.append(f"  constant     {_fmt(it.constant)}")
            lines.append(f"  worst_ratio  {_fmt(it.worst_ratio)}")
            lines.append(f"  trials       {it.trials}")
            if it.notes:
                lines.append(f"  notes        {it.notes}")
            if it.witness:
                lines.append(f"  witness      {_fmt(it.witness)}")
            if it.table:
                cols = list(it.table[0])
                lines.append("  " + "\t".join(cols))
                for row in it.table:
                    lines.append("  " + "\t".join(_fmt(row.get(c)) for c in cols))
        else:
            lines.append(f"{it.name}")
            for k, v in it.data.items():
                lines.append(f"  {k:<14} {_fmt(v)}")
    return "\n".join(lines) + "\n"


# --- argument handling -------------------------------------------------------------

def _floats(text: str, what: str) -> np.ndarray:
    try:
        vals = np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError:
        raise UsageError(f"{what} must be comma-separated numbers, got {text!r}") from None
    if not np.all(np.isfinite(vals)):
        raise UsageError(f"{what} must be finite")
    return vals


def _measure(text: str, chain: FiniteChain, what: str) -> np.ndarray:
    v = _floats(text, what)
    if v.size != chain.n:
        raise UsageError(f"{what} has {v.size} entries for {chain.n} states")
    if np.any(v < 0):
        raise UsageError(f"{what} has negative entries")
    if abs(v.sum() - 1.0) > 1e-9:
        raise UsageError(f"{what} sums to {float(v.sum()):.12g}, not 1")
    return v / v.sum()


def _density(text: str | None, chain: FiniteChain) -> np.ndarray:
    """Positive f rescaled to E_pi f = 1 (default: a tilt away from the first state)."""
    if text is None:
        return tilted_density(chain)
    f = _floats(text, "--f")
    if f.size != chain.n:
        raise UsageError(f"--f has {f.size} entries for {chain.n} states")
    if np.any(f <= 0):
        raise UsageError("--f must be strictly positive")
    return f / float(chain.stationary.weights @ f)


def _state(text: str | None, chain: FiniteChain, default: int = 0) -> int:
    if text is None:
        return default
    names = [str(s) for s in chain.states]
    if text in names:
        return names.index(text)
    try:
        k = int(text)
    except ValueError:
        raise UsageError(f"unknown state {text!r}") from None
    if not 0 <= k < chain.n:
        raise UsageError(f"state index {k} out of range")
    return k


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group(required=True)
    src.add_argument("--zoo", metavar="FAMILY:N", help="complete, cycle, hypercube, two_state or path")
    src.add_argument("--chain", metavar="PATH", help="chain description file (YAML)")
    common.add_argument("--laziness", type=float, help="holding probability r: p <- r I + (1-r) p")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--samples", type=int, help="sampled measures or Monte Carlo paths")
    common.add_argument("--trials", type=int, help="random test functions")
    common.add_argument("--T", type=float, dest="T", help="horizon")
    common.add_argument("--T-grid", dest="T_grid", help="comma-separated times")
    common.add_argument("--restarts", type=int, help="optimizer restarts")
    common.add_argument("--format", choices=FORMATS, default="table")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--mu", help="distribution as comma-separated weights")
    common.add_argument("--nu", help="target distribution as comma-separated weights")
    common.add_argument("--f", help="positive function, rescaled to E_pi f = 1")
    common.add_argument("--x0", help="start state (name or index)")
    common.add_argument("--C", type=float, dest="C", help="T1 constant (one-step for t1-scan, of pi for concentration)")
    common.add_argument("--mode", choices=("all_pairs", "neighbors_only"), default="all_pairs")
    common.add_argument("--verbose", action="store_true", help="include drift kernels in output")

    p = argparse.ArgumentParser(prog="chaincurv", description="Curvature and entropy analysis of finite Markov chains.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "curvature": "coarse Ricci curvature, Lipschitz contraction and diameter bound",
        "w1": "exact W1 distance, coupling and dual potential between --mu and --nu",
        "t1-scan": "transport-entropy scan against the curvature bound",
        "concentration": "Gaussian concentration of Lipschitz functions",
        "coupling-sim": "simulate the drift/walk coupling and check the entropy bound",
        "drift": "build the discrete drift to --nu and check its exactness",
        "mlsi": "modified log-Sobolev constant (upper-bound estimate)",
        "lsi": "log-Sobolev constant (upper-bound estimate)",
        "heat": "heat semigroup of --f on --T-grid with identity checks",
        "interp-scan": "path entropy and information rate along [0, T]",
        "report-all": "every analysis applicable to the chain",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name], description=helps[name])
    return p


def _load_chain(args) -> tuple[FiniteChain, str]:
    if args.zoo:
        return parse_zoo_spec(args.zoo, laziness=args.laziness), f"zoo:{args.zoo}"
    chain = parse_chain_file(args.chain)
    if args.laziness:
        from .chain import build_chain

        chain = build_chain(chain.kernel, states=chain.states,
                            metric=None if chain.graph_metric else chain.metric,
                            laziness=args.laziness)
    return chain, args.chain


# --- commands ----------------------------------------------------------------------

def _curvature(chain, args, seeds):
    res = coarse_ricci(chain, mode=args.mode)
    rec = Record("curvature", res.to_record(chain) | {"laziness": chain.laziness})
    return [
        rec,
        lipschitz_contraction_check(chain, res.kappa, trials=args.trials or 200, seed=seeds[0]),
        diameter_bound_check(chain, res.kappa),
    ]


def _w1(chain, args, seeds):
    if args.mu is None or args.nu is None:
        raise UsageError("w1 needs --mu and --nu")
    mu = _measure(args.mu, chain, "--mu")
    nu = _measure(args.nu, chain, "--nu")
    plan = w1(mu, nu, chain.metric)
    return [Record("w1", {"value": plan.value, "coupling": plan.coupling,
                          "dual_potential": plan.dual_potential})]


def _t1(chain, args, seeds):
    return [t1_scan(chain, samples=args.samples or 1000, seed=seeds[0], C=args.C)]


def _concentration(chain, args, seeds):
    return [gaussian_concentration_check(chain, C=args.C, trials=args.trials or 200, seed=seeds[0])]


def _target(chain, args, x0):
    if args.nu is not None:
        return _measure(args.nu, chain, "--nu")
    far = int(np.argmax(chain.metric[x0]))
    nu = np.zeros(chain.n)
    nu[far] = 1.0
    return nu


def _coupling(chain, args, seeds):
    x0 = _state(args.x0, chain)
    T = int(args.T or 6)
    nu = _target(chain, args, x0)
    return [coupling_simulation(chain, nu, x0, T, n_samples=args.samples or 100_000, seed=seeds[0])]


def _drift(chain, args, seeds):
    x0 = _state(args.x0, chain)
    T = int(args.T or 4)
    if args.T is not None and T != args.T:
        raise UsageError("drift needs an integer --T")
    nu = _target(chain, args, x0)
    sched = build_discrete_drift(chain, nu, x0, T)
    err = float(np.max(np.abs(endpoint_law(sched).weights - nu)))
    div = relative_entropy(nu, sched.mu_T.weights)
    chain_rule = path_relative_entropy(sched)
    items = [
        Record("drift", sched.to_record(verbose=args.verbose)),
        InequalityReport.asserted("endpoint_law", 1e-10, err, err <= 1e-10, trials=1,
                                  notes="max |law(X_T) - nu|"),
        InequalityReport.asserted("chain_rule_divergence", div, chain_rule,
                                  abs(chain_rule - div) <= 1e-9, trials=T,
                                  notes="path divergence by the chain rule vs D(nu || mu_T)"),
    ]
    try:
        items.append(path_density_check(sched))
        items.append(entropy_optimality_check(sched, rival_count=args.trials or 50, seed=seeds[0]))
    except InstanceTooLargeError as exc:
        items.append(InequalityReport("path_density", math.nan, math.nan, status=Status.NOT_APPLICABLE,
                                      notes=str(exc)))
    return items


def _sobolev(kind):
    def run(chain, args, seeds):
        fn = mlsi_constant if kind == "mlsi" else lsi_constant
        est = fn(chain, restarts=args.restarts or 32, seed=seeds[0])
        return [Record(kind, est.to_record())]
    return run


def _grid(args, chain, default):
    if args.T_grid is None:
        return default
    g = _floats(args.T_grid, "--T-grid")
    if np.any(g < 0):
        raise UsageError("--T-grid times must be nonnegative")
    return [float(t) for t in g]


def _heat(chain, args, seeds):
    f = _density(args.f, chain)
    t_rel = relaxation_time(chain)
    grid = _grid(args, chain, [0.0] + [m * t_rel for m in (0.5, 1, 2, 5)])
    pi = chain.stationary.weights
    rows = [{"t": t, "H_t f": heat_apply(chain, f, t), "entropy": entropy_functional(heat_apply(chain, f, t), pi)}
            for t in grid]
    return [
        Record("heat", {"f": f, "relaxation_time": t_rel, "values": rows}),
        heat_identity_check(chain, trials=args.trials or 50, seed=seeds[0]),
        entropy_monotonicity_check(chain, f, grid),
    ]


def _interp(chain, args, seeds):
    f = _density(args.f, chain)
    x0 = _state(args.x0, chain)
    T = args.T if args.T is not None else 2.0 * relaxation_time(chain)
    return [interpolation_scan(chain, f, x0, T, points=args.samples or 11)]


def _report_all(chain, args, seeds):
    items = _curvature(chain, args, seeds[0:1])
    kappa = items[0].data["kappa"]
    items += _t1(chain, args, seeds[1:2])
    items += _concentration(chain, args, seeds[2:3])
    items.append(Record("onestep_t1_constant", {"C": onestep_t1_constant(chain)}))
    items += _sobolev("lsi")(chain, args, seeds[3:4])
    items += _sobolev("mlsi")(chain, args, seeds[4:5])
    items.append(peres_tetali_report(chain, restarts=args.restarts or 32, seed=seeds[4]))
    if kappa > 0:
        x0 = _state(args.x0, chain)
        f = _density(args.f, chain)
        grid = _grid(args, chain, None)
        items.append(conjecture2_report(chain, f, x0, grid))
        items.append(conjecture2_report(chain, np.ones(chain.n), x0, grid))
        if chain.n ** int(args.T or 4) <= 10**6:
            items += _drift(chain, args, seeds[5:6])
        items += _coupling(chain, argparse.Namespace(**{**vars(args), "samples": args.samples or 20_000}),
                           seeds[6:7])
    items += _heat(chain, args, seeds[7:8])
    return items


HANDLERS = {
    "curvature": _curvature, "w1": _w1, "t1-scan": _t1, "concentration": _concentration,
    "coupling-sim": _coupling, "drift": _drift, "mlsi": _sobolev("mlsi"), "lsi": _sobolev("lsi"),
    "heat": _heat, "interp-scan": _interp, "report-all": _report_all,
}


def exit_code(items) -> int:
    failed = any(isinstance(it, InequalityReport) and it.status is Status.ASSERTED_FAIL for it in items)
    return 1 if failed else 0


def run(argv=None) -> tuple[int, str, str | None]:
    """Parse, execute and serialize; returns (exit code, output text, output path)."""
    args = _parser().parse_args(argv)
    chain, source = _load_chain(args)
    config = RunConfig(
        command=args.command, chain_source=source, seed=args.seed, laziness=chain.laziness,
        samples=args.samples, trials=args.trials, T=args.T,
        T_grid=None if args.T_grid is None else [float(t) for t in _floats(args.T_grid, "--T-grid")],
        restarts=args.restarts, format=args.format, out=args.out,
        options={k: getattr(args, k) for k in ("mu", "nu", "f", "x0", "C", "mode") if getattr(args, k) is not None},
    )
    seeds = np.random.SeedSequence(args.seed).spawn(8)
    items = HANDLERS[args.command](chain, args, seeds)
    return exit_code(items), emit_report(items, config), args.out


def main(argv=None) -> int:
    try:
        code, text, out = run(argv)
    except SystemExit as exc:  # argparse: --help, --version, usage errors
        return exc.code if isinstance(exc.code, int) else 2
    except ValueError as exc:  # every input error derives from ValueError
        print(f"chaincurv: error: {exc}", file=sys.stderr)
        return 2
    if out is None:
        sys.stdout.write(text)
        return code
    try:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"chaincurv: error: cannot write {out}: {exc.strerror}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
