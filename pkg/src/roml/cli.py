"""Command-line entry point: ``roml <command> [flags]``.

Commands: separation, delayed, constrained, switching, classify, bounds, tau.
Results go to stdout as CSV and, when an output directory is given (``--out``
or ``ROML_OUT_DIR``), to files in that directory. Exit codes: 0 success,
2 configuration error, 3 verification-suite failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path


from .concentration import exceedance_rate, hoeffding_wor_eps, serfling_eps
from .core import RomlError, make_rng, STREAM_AUX
from .experts import expected_tau_exact, simulate_tau
from .harness import (ALGORITHMS, GENERATORS, InstanceSpec, results_csv_text, run_trials,
                      write_trajectory_csv)

log = logging.getLogger("roml")

COMMANDS = ("separation", "delayed", "constrained", "switching", "classify", "bounds", "tau")

EXIT_OK, EXIT_CONFIG, EXIT_SUITE = 0, 2, 3

BASE_DEFAULTS = {
    "T": None, "k": 2, "m": 1, "d": [0], "rho": 0.25, "B": None, "delta": 0.1, "seeds": "1",
    "generator": None, "algo": None, "out": None, "jobs": 1, "gap": 0.3, "noise": 0.1, "grid": 64,
    "s": [16, 128], "trials": 10_000, "instance_seed": 0, "trajectories": False,
}

COMMAND_DEFAULTS = {
    "separation": {"generator": ["birthday_adversarial", "iid_uniform_support"], "algo": "birthday"},
    "delayed": {"generator": ["gap_bandit"], "algo": "sim_ftl", "k": 3, "gap": 0.1},
    "constrained": {"generator": ["constrained_random"], "algo": "sim_constrained", "k": 3, "m": 2},
    "switching": {"generator": ["gap_bandit"], "algo": "sse"},
    "classify": {"generator": ["threshold_labels"], "algo": "erm"},
    "bounds": {},
    "tau": {},
}


class ConfigError(RomlError):
    pass


def _int_list(text: str) -> list[int]:
    return [int(v) for v in str(text).replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roml", description=__doc__.splitlines()[0])
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--T", type=int, nargs="+", default=None, help="horizon(s)")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--d", type=int, nargs="+", default=None, help="delay(s)")
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--B", type=float, default=None, help="budget; overrides --rho as B/T")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--seeds", default=None, help="seed count N (seeds 0..N-1) or a comma list")
    p.add_argument("--generator", nargs="+", default=None, choices=sorted(GENERATORS))
    p.add_argument("--algo", default=None, choices=sorted(ALGORITHMS))
    p.add_argument("--out", default=None, help="output directory (fallback: $ROML_OUT_DIR)")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--gap", type=float, default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--s", type=int, nargs="+", default=None, help="sample sizes for 'bounds'")
    p.add_argument("--trials", type=int, default=None, help="Monte-Carlo repetitions for 'bounds'/'tau'")
    p.add_argument("--instance-seed", dest="instance_seed", type=int, default=None)
    p.add_argument("--trajectories", action="store_true", default=None, help="also write per-seed trajectories")
    p.add_argument("--config", default=None, help="JSON config; explicit flags override it")
    p.add_argument("--dump-config", dest="dump_config", default=None, help="write the resolved config here")
    return p


def resolve_config(args: argparse.Namespace) -> dict:
    from_file = {}
    if args.config:
        try:
            from_file = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    command = args.command or from_file.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"missing or unknown command {command!r}")
    cfg = dict(BASE_DEFAULTS)
    cfg.update(COMMAND_DEFAULTS[command])
    cfg.update({k: v for k, v in from_file.items() if k != "command"})
    explicit = {k: v for k, v in vars(args).items()
                if v is not None and k not in ("command", "config", "dump_config")}
    cfg.update(explicit)
    cfg["command"] = command
    if cfg["out"] is None and os.environ.get("ROML_OUT_DIR"):
        cfg["out"] = os.environ["ROML_OUT_DIR"]
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    if not cfg["T"]:
        raise ConfigError("--T is required")
    if isinstance(cfg["T"], int):
        cfg["T"] = [cfg["T"]]
    if isinstance(cfg["d"], int):
        cfg["d"] = [cfg["d"]]
    if isinstance(cfg["generator"], str):
        cfg["generator"] = [cfg["generator"]]
    if any(T < 1 for T in cfg["T"]):
        raise ConfigError("horizons must be positive")
    if cfg["k"] < 1 or cfg["m"] < 1:
        raise ConfigError("k and m must be positive")
    if not 0 < cfg["delta"] < 1:
        raise ConfigError("delta must lie in (0, 1)")
    if cfg["jobs"] < 1:
        raise ConfigError("jobs must be >= 1")
    if any(d < 0 for d in cfg["d"]):
        raise ConfigError("delays must be non-negative")
    if cfg["trials"] < 1:
        raise ConfigError("trials must be >= 1")
    cfg["seed_list"] = parse_seeds(cfg["seeds"])
    for g in cfg["generator"] or []:
        if g not in GENERATORS:
            raise ConfigError(f"unknown generator {g!r}")
    if cfg["algo"] is not None and cfg["algo"] not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {cfg['algo']!r}")


def parse_seeds(value) -> list[int]:
    if isinstance(value, list):
        seeds = [int(v) for v in value]
    else:
        text = str(value).strip()
        if "," in text:
            seeds = _int_list(text)
        else:
            try:
                n = int(text)
            except ValueError as exc:
                raise ConfigError(f"bad --seeds value {value!r}") from exc
            if n < 1:
                raise ConfigError("seed count must be positive")
            seeds = list(range(n))
    if len(set(seeds)) != len(seeds) or any(s < 0 for s in seeds):
        raise ConfigError("seeds must be distinct non-negative integers")
    return seeds


def _emit(cfg: dict, name: str, text: str, out_lines: list) -> None:
    out_lines.append(text)
    if cfg["out"]:
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.csv").write_text(text)


def _run_experiment(cfg: dict, out_lines: list) -> int:
    command = cfg["command"]
    first = True
    for generator in cfg["generator"]:
        for T in cfg["T"]:
            delays = cfg["d"] if command == "delayed" else [None]
            for d in delays:
                rho = cfg["B"] / T if cfg["B"] is not None else cfg["rho"]
                spec = InstanceSpec(generator=generator, T=T, k=cfg["k"], m=cfg["m"], rho=rho, gap=cfg["gap"],
                                    noise=cfg["noise"], seed=cfg["instance_seed"], grid=cfg["grid"],
                                    best=cfg["k"] - 1 if command == "delayed" else 0)
                opts = {"delta": cfg["delta"]}
                tag = f"{command}_{generator}_T{T}"
                if d is not None:
                    opts["d"] = d
                    tag += f"_d{d}"
                log.info("running %s on %s", cfg["algo"], tag)
                agg = run_trials(cfg["algo"], spec, cfg["seed_list"], opts, jobs=cfg["jobs"])
                text = results_csv_text(agg.reports, header=True)
                _emit(cfg, tag, text, out_lines if first else [])
                if not first:
                    out_lines.append(text.split("\n", 1)[1])
                first = False
                if cfg["out"] and cfg["trajectories"]:
                    for report in agg.reports:
                        write_trajectory_csv(cfg["out"], report, prefix=f"{tag}_")
    return EXIT_OK


def _run_tau(cfg: dict, out_lines: list) -> int:
    lines = ["T,expected_tau,mc_mean,mc_stderr,within_3se"]
    ok = True
    for T in cfg["T"]:
        exact = expected_tau_exact(T)
        taus = simulate_tau(T, cfg["trials"], cfg["seed_list"][0])
        se = taus.std(ddof=1) / math.sqrt(len(taus)) if len(taus) > 1 else float("inf")
        within = abs(taus.mean() - exact) <= 3 * se
        ok &= bool(within)
        lines.append(f"{T},{exact!r},{float(taus.mean())!r},{float(se)!r},{int(within)}")
    _emit(cfg, "tau", "\n".join(lines) + "\n", out_lines)
    return EXIT_OK if ok else EXIT_SUITE


def _run_bounds(cfg: dict, out_lines: list) -> int:
    lines = ["T,s,delta,hoeffding_eps,serfling_eps,hoeffding_exceedance,serfling_exceedance,pass"]
    ok = True
    delta = cfg["delta"]
    for T in cfg["T"]:
        rng = make_rng(cfg["seed_list"][0], STREAM_AUX)
        population = rng.random(T)
        for s in cfg["s"]:
            if not 1 <= s <= T:
                raise ConfigError(f"sample size {s} outside [1, {T}]")
            h = exceedance_rate(population, s, delta, cfg["trials"], rng, bound="hoeffding")
            sf = exceedance_rate(population, s, delta, cfg["trials"], rng, bound="serfling")
            passed = h <= delta and serfling_eps(s, T, delta) <= hoeffding_wor_eps(s, delta)
            ok &= passed
            lines.append(f"{T},{s},{delta!r},{hoeffding_wor_eps(s, delta)!r},{serfling_eps(s, T, delta)!r},"
                         f"{h!r},{sf!r},{int(passed)}")
    _emit(cfg, "bounds", "\n".join(lines) + "\n", out_lines)
    return EXIT_OK if ok else EXIT_SUITE


def run_cli(argv=None, stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_CONFIG
    try:
        cfg = resolve_config(args)
        if args.dump_config:
            dumped = {k: v for k, v in cfg.items() if k not in ("seed_list",)}
            Path(args.dump_config).write_text(json.dumps(dumped, indent=2, sort_keys=True))
        out_lines: list[str] = []
        if cfg["command"] == "tau":
            code = _run_tau(cfg, out_lines)
        elif cfg["command"] == "bounds":
            code = _run_bounds(cfg, out_lines)
        else:
            code = _run_experiment(cfg, out_lines)
    except RomlError as exc:
        print(f"roml: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    stdout.write("".join(out_lines))
    return code


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
