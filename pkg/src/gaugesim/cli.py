"""Command-line front end.

Exit codes: 0 run completed and every verdict passed, 1 a verdict failed,
2 usage, configuration or I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from gaugesim import bell, consistency, signaling, spacetime
from gaugesim.core import DiscreteGaugeSystem, GaugeSystem
from gaugesim.errors import ConfigurationError, GaugeError
from gaugesim.models import MODELS, exact_correlation_discrete, get_model
from gaugesim.sampler import DEFAULT_SEED, seed_from_env
from gaugesim.serialize import dumps

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

SUBCOMMANDS = ("table1", "circle", "bell", "consistency", "signaling", "spacetime", "yield")

_ANGLE = re.compile(r"^\s*([+-]?(?:\d+(?:\.\d*)?|\.\d+)?)\s*\*?\s*pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$", re.I)

DEFAULT_ARGS = {
    "table1": ("a", "b", "c"),
    "circle": (0.0, math.pi / 4, math.pi / 2),
    "kolmogorov-uniform": (0.0, math.pi / 4, math.pi / 2),
}
DEFAULT_CHANNEL = {
    "table1": (("a", "b"), "c"),
    "circle": ((0.0, math.pi / 3), math.pi / 5),
    "kolmogorov-uniform": ((0.0, math.pi / 3), math.pi / 5),
}


def parse_angle(text: str) -> float:
    """Decimal radians or a multiple/fraction of pi: "0.5", "pi/4", "-3pi/4"."""
    t = text.strip()
    m = _ANGLE.match(t)
    if m:
        coef, den = m.group(1), m.group(2)
        if coef in ("", "+"):
            c = 1.0
        elif coef == "-":
            c = -1.0
        else:
            c = float(coef)
        return c * math.pi / (float(den) if den else 1.0)
    try:
        return float(t)
    except ValueError:
        raise ConfigurationError(f"cannot parse angle {text!r}") from None


def parse_arguments(sys_: GaugeSystem, items: Sequence) -> list:
    out = []
    for item in items:
        if isinstance(sys_, DiscreteGaugeSystem):
            out.append(sys_.canonical_argument(str(item).strip()))
        elif isinstance(item, str):
            out.append(parse_angle(item))
        else:
            out.append(float(item))
    return out


def _split(text) -> list:
    if text is None:
        return []
    if isinstance(text, (list, tuple)):
        return list(text)
    return [p for p in str(text).split(",") if p.strip()]


def parse_sweep(text: str) -> list[float]:
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigurationError(f"sweep must be start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise ConfigurationError(f"bad sweep {text!r}")
    k = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + i * step, 12) for i in range(k + 1)]


def parse_shutters(text) -> tuple | None:
    if text is None or str(text).strip().lower() == "never":
        return None
    parts = [p.strip().lower() for p in str(text).split(",")]
    if len(parts) != 2:
        raise ConfigurationError(f"shutters must be 'never' or 't8,t9', got {text!r}")
    return tuple(None if p == "never" else float(p) for p in parts)


def parse_ignition(text: str) -> tuple[str, float | None]:
    if text.startswith("fixed:"):
        return "fixed", float(text.split(":", 1)[1])
    return text, None


@dataclass
class RunConfig:
    subcommand: str
    model: str
    arguments: list = field(default_factory=list)
    n: int = 100_000
    seed: int = DEFAULT_SEED
    m: str | None = None
    tol: float | None = None
    json: bool = False
    out: str | None = None
    threads: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigurationError(f"unknown model {self.model!r}; choose from {sorted(MODELS)}")
        if self.n < 1:
            raise ConfigurationError("--n must be >= 1")
        if self.threads < 1:
            raise ConfigurationError("--threads must be >= 1")

    def system(self) -> GaugeSystem:
        m = None
        if self.m is not None:
            m = Fraction(self.m) if self.model == "table1" else float(Fraction(self.m))
        return get_model(self.model, m=m)

    def parsed_arguments(self, sys_: GaugeSystem, default: Sequence) -> list:
        return parse_arguments(sys_, self.arguments or list(default))


# ---------------------------------------------------------------------------
# output helpers


class Output:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.lines: list[str] = []

    def say(self, text: str = "") -> None:
        self.lines.append(text)

    def write(self, name: str, text: str) -> None:
        if self.cfg.out is None:
            return
        path = Path(self.cfg.out) / name
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, newline="")
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc

    def finish(self, report: dict[str, Any], passed: bool, name: str) -> int:
        report = dict(report)
        report["pass"] = bool(passed)
        text = dumps(report)
        self.write(f"{name}.json", text)
        if self.cfg.json:
            sys.stdout.write(text)
        else:
            self.say(f"verdict: {'PASS' if passed else 'FAIL'}")
            print("\n".join(self.lines))
        return EXIT_OK if passed else EXIT_FAIL


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    if x is None:
        return "n/a"
    return f"{float(x):.6f}"


def _name(u) -> str:
    return u if isinstance(u, str) else f"{float(u):.6g}"


# ---------------------------------------------------------------------------
# subcommands


def cmd_table1(cfg: RunConfig) -> int:
    sys_ = get_model("table1")
    out = Output(cfg)
    ms = [Fraction(0), Fraction(1)]
    chosen = Fraction(cfg.m) if cfg.m is not None else Fraction(1)
    if chosen not in ms:
        ms.append(chosen)
    table = {}
    out.say("exact correlations (six-outcome gauge system)")
    out.say(f"{'m':>6} {'M(a,b)':>8} {'M(a,c)':>8} {'M(b,c)':>8}")
    for m in ms:
        row = {f"{u}{v}": exact_correlation_discrete(sys_, u, v, m) for u, v in (("a", "b"), ("a", "c"), ("b", "c"))}
        table[str(m)] = row
        out.say(f"{str(m):>6} {str(row['ab']):>8} {str(row['ac']):>8} {str(row['bc']):>8}")
    row = table[str(chosen)]
    ev = bell.bell_check(row["ab"], row["ac"], row["bc"], arguments=("a", "b", "c"))
    independent = all(r == table["0"] for r in table.values())
    out.say(f"Bell inequality |M(a,b) - M(a,c)| <= 1 - M(b,c): {ev.describe()}")
    out.say(f"m-independent: {independent}")
    report = {"command": "table1", "m": str(chosen), "correlations": table, "bell": ev.to_dict(),
              "m_independent": independent}
    return out.finish(report, independent and ev.violated, "table1")


def _mc_correlation(sys_, u, v, cfg: RunConfig, k: int):
    s1, s2 = bell.sample_pair_arrays(sys_, u, v, cfg.n, cfg.seed + k, threads=cfg.threads)
    return float(bell.empirical_correlation(s1, s2))


def cmd_circle(cfg: RunConfig) -> int:
    cfg.model = "circle"
    sys_ = cfg.system()
    a, b, c = cfg.parsed_arguments(sys_, DEFAULT_ARGS["circle"])
    out = Output(cfg)
    pairs = (("ab", a, b), ("ac", a, c), ("bc", b, c))
    quad, mc, ok = {}, {}, True
    out.say(f"circle model, N={cfg.n}, seed={cfg.seed}")
    out.say(f"{'pair':>5} {'cos(u-v)':>10} {'quadrature':>11} {'monte carlo':>12} {'4 sigma':>9}")
    for k, (key, u, v) in enumerate(pairs):
        q = consistency.correlation(sys_, u, v)
        e = _mc_correlation(sys_, u, v, cfg, k)
        tol = 4.0 * max(bell.correlation_sigma(q, cfg.n), 1.0 / cfg.n)
        good = abs(e - q) <= tol
        ok &= good
        quad[key], mc[key] = q, {"estimate": e, "tol": tol, "agree": good}
        out.say(f"{key:>5} {math.cos(u - v):>10.6f} {q:>11.6f} {e:>12.6f} {tol:>9.5f}{'' if good else '  MISMATCH'}")
    rep = consistency.verify_consistency(sys_, [a, b, c], tol=cfg.tol)
    ev = bell.bell_check(quad["ab"], quad["ac"], quad["bc"], arguments=(a, b, c), source="quadrature")
    out.say("consistency (quadrature):")
    out.say(rep.table())
    out.say(f"Bell: {ev.describe()}, margin {ev.margin:.4f}")
    report = {"command": "circle", "arguments": [a, b, c], "n": cfg.n, "seed": cfg.seed,
              "quadrature": quad, "monte_carlo": mc, "consistency": rep.to_dict(), "bell": ev.to_dict()}
    return out.finish(report, ok and rep.passed, "circle")


def cmd_bell(cfg: RunConfig) -> int:
    sys_ = cfg.system()
    args = cfg.parsed_arguments(sys_, DEFAULT_ARGS[cfg.model])
    if len(args) != 3:
        raise ConfigurationError("bell needs exactly three arguments a,b,c")
    a, b, c = args
    out = Output(cfg)
    exact = [consistency.correlation(sys_, u, v) for u, v in ((a, b), (a, c), (b, c))]
    ev_exact = bell.bell_check(*exact, arguments=args, source="exact")
    out.say(f"model {cfg.model}, arguments ({', '.join(_name(u) for u in args)})")
    out.say(f"exact: M(a,b)={_fmt(exact[0])} M(a,c)={_fmt(exact[1])} M(b,c)={_fmt(exact[2])}  {ev_exact.describe()}")
    report = {"command": "bell", "model": cfg.model, "arguments": args, "n": cfg.n, "seed": cfg.seed,
              "exact": ev_exact.to_dict()}
    if sys_.is_decoupled:
        arrays = bell.shared_outcome_triple(sys_, args, cfg.n, cfg.seed, threads=cfg.threads)
        ev = bell.empirical_bell(*arrays)
        passed = not ev.violated
        out.say(f"shared outcome arrays (N={cfg.n}): {ev.describe()}")
        report["empirical"] = ev.to_dict()
        report["mode"] = "shared-outcome"
        out.write("arrays.csv", bell.arrays_to_csv(arrays))
    else:
        est, passed = [], True
        for k, (u, v) in enumerate(((a, b), (a, c), (b, c))):
            s1, s2 = bell.sample_pair_arrays(sys_, u, v, cfg.n, cfg.seed + k, threads=cfg.threads)
            e = bell.empirical_correlation(s1, s2)
            tol = 4.0 * max(bell.correlation_sigma(float(exact[k]), cfg.n), 1.0 / cfg.n)
            passed &= abs(float(e) - float(exact[k])) <= tol
            est.append(e)
            out.write(f"arrays_{_name(u)}_{_name(v)}.csv", bell.arrays_to_csv([s1, s2]))
        ev = bell.bell_check(*est, arguments=args, source="empirical")
        out.say(f"sampled pairs (N={cfg.n} each): {ev.describe()}")
        report["empirical"] = ev.to_dict()
        report["mode"] = "per-pair"
    return out.finish(report, bool(passed), "bell")


def cmd_consistency(cfg: RunConfig) -> int:
    sys_ = cfg.system()
    args = cfg.parsed_arguments(sys_, DEFAULT_ARGS[cfg.model])
    method = cfg.extra.get("method")
    rep = consistency.verify_consistency(sys_, args, tol=cfg.tol, method=method, n=cfg.n, seed=cfg.seed,
                                         threads=cfg.threads)
    out = Output(cfg)
    out.say(f"consistency of {rep.system} ({rep.method})")
    out.say(rep.table())
    return out.finish({"command": "consistency", "report": rep.to_dict()}, rep.passed, "consistency")


def cmd_signaling(cfg: RunConfig) -> int:
    sys_ = cfg.system()
    inputs_default, u2_default = DEFAULT_CHANNEL[cfg.model]
    inputs = parse_arguments(sys_, _split(cfg.extra.get("inputs")) or list(inputs_default))
    if len(inputs) != 2:
        raise ConfigurationError("--inputs needs exactly two arguments")
    u2_text = cfg.extra.get("u2")
    u2 = parse_arguments(sys_, [u2_text])[0] if u2_text is not None else u2_default
    exp = signaling.ChannelExperiment(float(Fraction(str(cfg.extra.get("qa", 0.5)))), u2, tuple(inputs),
                                      cfg.n, cfg.seed)
    rep = signaling.run_channel(sys_, exp, threads=cfg.threads)
    out = Output(cfg)
    out.say(f"channel: u1 in ({_name(inputs[0])}, {_name(inputs[1])}), q_a={exp.q_a}, u2={_name(u2)}, N={exp.n}")
    for key in ("+1", "-1"):
        out.say(f"  pr(u1=a | s2={key}) = {_fmt(rep.posteriors[key])}  (4 sigma = {_fmt(4 * rep.sigmas[key] if rep.sigmas[key] is not None else None)})")
    out.say(f"consistency conditions hold: {rep.consistent}")
    out.say(rep.verdict)
    return out.finish({"command": "signaling", "report": rep.to_dict()}, rep.no_signaling, "signaling")


def _spacetime_config(cfg: RunConfig) -> spacetime.SpacetimeConfig:
    sys_ = cfg.system()
    x = cfg.extra
    policy = x.get("policy", "fixed")
    if cfg.arguments:
        args = parse_arguments(sys_, cfg.arguments)
    elif policy == "uniform":
        args = list(DEFAULT_ARGS[cfg.model])
    else:
        args = list(DEFAULT_ARGS[cfg.model][:2]) if cfg.model == "table1" else [0.0, math.pi / 3]
    law, value = parse_ignition(x.get("ignition", "uniform"))
    return spacetime.SpacetimeConfig(
        T=float(x.get("T", 1.0)),
        ignition=law,
        ignition_value=value,
        open_times=(float(x.get("t3", 0.5)), float(x.get("t4", 0.5))),
        arrival_time=float(x.get("t5", 1.0)),
        shutter_times=parse_shutters(x.get("shutters")),
        argument_policy=policy,
        arguments=tuple(args),
        model=cfg.model,
        n=cfg.n,
        seed=cfg.seed,
    )


def cmd_spacetime(cfg: RunConfig) -> int:
    st = _spacetime_config(cfg)
    run = spacetime.run_protocol(st, threads=cfg.threads)
    s = run.summary
    out = Output(cfg)
    rise = s["risetime"]
    out.say(f"ignition-point protocol: model {st.model}, T={st.T}, N={st.n}, ignition {st.ignition}")
    out.say(f"yield {s['yield']:.6f}  (station 1 {s['detection_rate_1']:.6f}, station 2 {s['detection_rate_2']:.6f})")
    out.say(f"risetime: max completion {rise['max_completion']:.6g}, mean early-side completion "
            f"{rise['mean_min_completion']:.6g}")
    out.say(f"causality violations: {s['causality_violations']}")
    for r in s["correlations"]:
        out.say(f"  M({r['pair']}): full {_fmt(r['full'])} (n={r['n_full']}), detected {_fmt(r['detected'])} "
                f"(n={r['n_detected']})")
    if s["bell"] is not None:
        out.say(f"Bell from detected pairs: {bell.BellEvaluation.from_dict(s['bell']['empirical']).describe()}; "
                f"matches reference: {s['bell']['within_tolerance']}")
    scaling = cfg.extra.get("risetime_scaling")
    report = {"command": "spacetime", "summary": s}
    if scaling:
        totals = [float(t) for t in _split(scaling)]
        report["risetime_scaling"] = spacetime.risetime_scaling(st, totals, threads=cfg.threads)
        for row in report["risetime_scaling"]:
            out.say(f"  T={row['T']:g}: max completion {row['max_completion']:.6g}, "
                    f"mean early completion {row['mean_min_completion']:.6g}")
    out.write("timelines.csv", run.timelines.to_csv())
    return out.finish(report, s["pass"], "spacetime")


def cmd_yield(cfg: RunConfig) -> int:
    st = _spacetime_config(cfg)
    margins = parse_sweep(cfg.extra.get("sweep") or f"0:{2 * st.T}:{st.T / 10 if st.T > 0 else 0.1}")
    side = cfg.extra.get("side") or "both"
    curve = spacetime.yield_curve(st, margins, sides=side, threads=cfg.threads)
    ys = [y for _, y in curve]
    monotone = all(y1 <= y2 for y1, y2 in zip(ys, ys[1:]))
    out = Output(cfg)
    out.say(f"yield sweep (shutters at t5 + delta on side {side}), T={st.T}, N={st.n}")
    for d, y in curve:
        out.say(f"  delta={d:<8g} yield={y:.6f}")
    report = {"command": "yield", "T": st.T, "side": side, "curve": [[d, y] for d, y in curve],
              "monotone": monotone}
    passed = monotone
    if side == "both":
        step = next((d for d, y in curve if y > 0), None)
        expected = all((y == 1.0) if d >= st.T else (y == 0.0) for d, y in curve)
        report["step_at"] = step
        report["step_matches_T"] = expected
        out.say(f"step at delta = {step:g}" if step is not None else "no detections in sweep")
        passed &= expected
    out.write("yield.csv", spacetime.yield_csv(curve))
    return out.finish(report, passed, "yield")


COMMANDS = {
    "table1": cmd_table1,
    "circle": cmd_circle,
    "bell": cmd_bell,
    "consistency": cmd_consistency,
    "signaling": cmd_signaling,
    "spacetime": cmd_spacetime,
    "yield": cmd_yield,
}


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps an unset flag out of the namespace, so a value given
    # before the subcommand is not overwritten by the subparser's default
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=lambda s: int(s, 0),
                   help=f"master seed (default: $GAUGESIM_SEED or {DEFAULT_SEED})")
    g.add_argument("--n", type=int, help="number of trials / pairs")
    g.add_argument("--m", help="mixing coefficient, e.g. 1, 0, 1/2")
    g.add_argument("--tol", type=float, help="override verdict tolerance")
    g.add_argument("--json", action="store_true", help="print the JSON report instead of tables")
    g.add_argument("--out", help="directory for CSV/JSON artifacts")
    g.add_argument("--threads", type=int, help="worker threads (never changes results)")
    g.add_argument("--config", help="JSON file with default values for these options")
    g.add_argument("--model", choices=sorted(MODELS))
    g.add_argument("--args", dest="arguments",
                   help="comma-separated arguments: labels (table1) or angles such as 0,pi/4,pi/2")

    parser = argparse.ArgumentParser(prog="gaugesim", description=__doc__.splitlines()[0],
                                     parents=[common])
    sub = parser.add_subparsers(dest="subcommand", metavar="COMMAND")

    sub.add_parser("table1", parents=[common], help="exact six-outcome correlations and Bell check")
    sub.add_parser("circle", parents=[common], help="circle model: quadrature, Monte Carlo, Bell")
    sub.add_parser("bell", parents=[common], help="Bell inequality from exact and sampled correlations")
    p = sub.add_parser("consistency", parents=[common], help="check the consistency conditions")
    p.add_argument("--method", choices=("exact", "quadrature", "monte-carlo"), default=None)
    p = sub.add_parser("signaling", parents=[common], help="posterior vs prior over a one-bit channel")
    p.add_argument("--qa", default=None, help="prior probability of the first input")
    p.add_argument("--inputs", default=None, help="the two station-1 arguments")
    p.add_argument("--u2", default=None, help="station-2 argument")
    for name, helptext in (("spacetime", "ignition-point protocol simulation"),
                           ("yield", "yield versus shutter margin")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--T", type=float, default=None, help="total delay tau1 + tau2")
        p.add_argument("--ignition", default=None, help="uniform, triangular or fixed:<tau1>")
        p.add_argument("--policy", choices=("fixed", "uniform"), default=None,
                       help="fixed (u1, u2) or uniform over the argument list")
        p.add_argument("--shutters", default=None, help="'never' or 't8,t9' (either may be 'never')")
        p.add_argument("--t3", type=float, default=None)
        p.add_argument("--t4", type=float, default=None)
        p.add_argument("--t5", type=float, default=None)
        if name == "spacetime":
            p.add_argument("--risetime-scaling", default=None, help="comma-separated T values")
        else:
            p.add_argument("--sweep", default=None, help="start:stop:step of shutter margins")
            side = p.add_mutually_exclusive_group()
            side.add_argument("--symmetric", dest="side", action="store_const", const="both")
            side.add_argument("--side", dest="side", choices=("1", "2"))
    return parser


_GLOBAL_KEYS = {"seed", "n", "m", "tol", "json", "out", "threads", "model", "arguments", "subcommand", "config"}


def _load_config(path: str) -> dict[str, Any]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigurationError(f"config {path} must hold a JSON object")
    return doc


def resolve(ns: argparse.Namespace) -> RunConfig:
    """Merge command line, config file, environment and defaults (in that order)."""
    config_path = getattr(ns, "config", None)
    file_cfg = _load_config(config_path) if config_path else {}
    sub = getattr(ns, "subcommand", None) or file_cfg.get("subcommand")
    if sub not in COMMANDS:
        raise ConfigurationError(f"missing or unknown subcommand; choose from {', '.join(SUBCOMMANDS)}")
    values = {k: v for k, v in vars(ns).items() if v is not None}

    def pick(key, default=None):
        if key in values:
            return values[key]
        return file_cfg.get(key, default)

    seed = values.get("seed")
    if seed is None:
        seed = seed_from_env(default=file_cfg.get("seed", DEFAULT_SEED))
    model_default = "table1" if sub == "table1" else ("circle" if sub != "signaling" else "table1")
    extra = {k: v for k, v in file_cfg.items() if k not in _GLOBAL_KEYS}
    extra.update({k: v for k, v in values.items() if k not in _GLOBAL_KEYS})
    m = pick("m")
    return RunConfig(
        subcommand=sub,
        model=pick("model", model_default),
        arguments=_split(pick("arguments")),
        n=int(pick("n", 100_000)),
        seed=int(seed),
        m=None if m is None else str(m),
        tol=pick("tol"),
        json=bool(pick("json", False)),
        out=pick("out"),
        threads=int(pick("threads", 1)),
        extra=extra,
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = resolve(ns)
        return COMMANDS[cfg.subcommand](cfg)
    except (GaugeError, ValueError) as exc:
        print(f"gaugesim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"gaugesim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
