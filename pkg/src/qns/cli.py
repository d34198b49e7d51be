"""Command-line entry point: ``qns {rates,simulate,threshold,faults,rate-calc}``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import analysis
from .faults import CLASSES, enumerate_fault_table
from .noise import PhysicalNoise, full_rates

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NO_CROSSING = 0, 1, 2, 3


class ConfigError(Exception):
    pass


def _int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


def _float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _seed(text) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _default_seed() -> int:
    env = os.environ.get("QNS_SEED")
    if env is None:
        return 0
    try:
        return _seed(env)
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise ConfigError(f"QNS_SEED: {exc}") from exc


@dataclass
class RunConfig:
    """The resolved parameters of one command; reproduces the run on its own."""

    command: str
    params: dict = field(default_factory=dict)

    def to_toml(self) -> str:
        lines = [f'command = "{self.command}"']
        for k, v in sorted(self.params.items()):
            if v is None:
                continue
            if isinstance(v, bool):
                lines.append(f"{k} = {str(v).lower()}")
            elif isinstance(v, (int, float)):
                lines.append(f"{k} = {v!r}")
            elif isinstance(v, (list, tuple)):
                lines.append(f'{k} = "{",".join(map(str, v))}"')
            else:
                lines.append(f'{k} = "{v}"')
        return "\n".join(lines) + "\n"


# -- parser ---------------------------------------------------------------------------


def _noise_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--q", type=float, default=0.0, help="Werner noise parameter")
    p.add_argument("--p", type=float, default=0.0, help="local operation error rate")
    p.add_argument("--pm", "--p-m", dest="pm", type=float, default=0.0, help="memory error rate")


def _common(p: argparse.ArgumentParser, seed: bool = False, output: bool = True) -> None:
    p.add_argument("--config", help="flat TOML file; command-line flags override it")
    p.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
    if seed:
        p.add_argument("--seed", type=_seed, default=None, help="64-bit seed (default $QNS_SEED or 0)")
        p.add_argument("--workers", type=int, default=1, help="worker processes (never changes output)")
    if output:
        p.add_argument("--output", "-o", help="write the CSV here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qns", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rates", help="effective rates and final-state fidelity")
    _noise_flags(p)
    _common(p, output=False)

    p = sub.add_parser("simulate", help="Monte Carlo logical failure rate")
    p.add_argument("--geometry", choices=("torus", "rectangle"), default="torus")
    p.add_argument("--d", type=_int_list, default=[5], help="distance(s), comma separated")
    p.add_argument("--margin", type=int, default=0, help="rectangle margin (default: rounds)")
    p.add_argument("--eps-E", dest="eps_E", type=_float_list, default=[0.0], help="eps_E value(s)")
    p.add_argument("--ratio", type=float, default=1.0, help="eps_S / eps_E")
    p.add_argument("--eps-C", dest="eps_C", type=float, default=0.0)
    p.add_argument("--rounds", type=int, default=0, help="rounds (default: d, or margin)")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--sectors", default="Z", help="Z, X or Z,X (a trial fails if any listed sector fails)")
    p.add_argument("--decoder", choices=("pymatching", "blossom"), default="pymatching")
    p.add_argument("--full-readout", dest="full_readout", action="store_true")
    _common(p, seed=True)

    p = sub.add_parser("threshold", help="threshold sweep and line fit")
    p.add_argument("--ratios", type=_float_list, default=[1.0, 1.5, 2.0, 2.5, 3.0])
    p.add_argument("--sizes", type=_int_list, default=[5, 7, 9])
    p.add_argument("--trials", type=int, default=20000, help="trials per fine-grid point")
    p.add_argument("--coarse", type=_float_list, default=None,
                   help="eps_E grid of the bracketing scan (default 0.01..0.05)")
    p.add_argument("--fit-output", dest="fit_output", help="write threshold points and fit JSON here")
    _common(p, seed=True)

    p = sub.add_parser("faults", help="circuit fault counting against the closed-form rates")
    _noise_flags(p)
    p.add_argument("--byproduct-faults", dest="byproduct_faults", action="store_true",
                   help="treat byproduct Paulis as noisy gates")
    _common(p, output=False)

    p = sub.add_parser("rate-calc", help="link success probability, ebit rate, long-chain error")
    p.add_argument("--distance-km", dest="distance_km", type=float, default=10.0)
    p.add_argument("--attenuation", type=float, default=0.2, help="dB per km")
    p.add_argument("--attempts", type=int, default=6, help="attempts per window (sets attempt time)")
    p.add_argument("--attempt-time", dest="attempt_time", type=float, default=None, help="seconds")
    p.add_argument("--window", type=float, default=2e-4, help="window T in seconds")
    p.add_argument("--rounds", type=int, default=25)
    p.add_argument("--nodes", type=float, default=1e5, help="L for the long-chain estimate")
    p.add_argument("--kappa", type=float, default=1.0)
    _common(p, output=False)
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def parse(argv: list[str]) -> argparse.Namespace:
    """Parse flags, layering: built-in defaults < config file < explicit flags."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config, "rb") as fh:  # OSError surfaces as an I/O failure
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{args.config}: {exc}") from exc
        data.pop("command", None)
        sub = _subparser(parser, args.command)
        actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
        defaults = {}
        for key, value in data.items():
            dest = key.replace("-", "_")
            if dest not in actions:
                raise ConfigError(f"{args.config}: unknown key {key!r} for {args.command}")
            if isinstance(value, dict):
                raise ConfigError(f"{args.config}: {key} must be a number or string")
            conv = actions[dest].type
            try:
                defaults[dest] = conv(value) if conv is not None and not isinstance(value, bool) else value
            except (ValueError, TypeError, argparse.ArgumentTypeError) as exc:
                raise ConfigError(f"{args.config}: bad value for {key}: {exc}") from exc
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    if getattr(args, "seed", "absent") is None:
        args.seed = _default_seed()
    return args


def _run_config(args: argparse.Namespace) -> RunConfig:
    skip = {"command", "config", "dump_config", "output", "fit_output", "workers"}
    return RunConfig(args.command, {k: v for k, v in vars(args).items() if k not in skip})


# -- commands -------------------------------------------------------------------------


def cmd_rates(args, out) -> int:
    noise = PhysicalNoise(args.q, args.p, args.pm)
    rates = full_rates(noise)
    report = analysis.final_state_noise(noise)
    out.write(json.dumps({"noise": noise.to_dict(), "rates": rates.to_dict(),
                          "channel_error_rate": noise.channel_error_rate,
                          "fidelity": json.loads(report.to_json())}, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    sectors = tuple(s.strip() for s in args.sectors.split(",") if s.strip())
    rows = []
    for d in args.d:
        for e in args.eps_E:
            cfg = analysis.SimConfig(geometry=args.geometry, distance=d, margin=args.margin,
                                     eps_E=e, eps_S=min(args.ratio * e, 1.0), eps_C=args.eps_C,
                                     n_rounds=args.rounds, seed=args.seed, sectors=sectors,
                                     decoder=args.decoder, full_readout=args.full_readout)
            batch = analysis.estimate_logical_error_rate(cfg, args.trials, args.workers)
            row = analysis.batch_row(batch)
            row["ratio"] = args.ratio
            rows.append(row)
    analysis.write_csv(rows, out)
    return EXIT_OK


def cmd_threshold(args, out) -> int:
    estimates = []
    rows = []
    for ratio in args.ratios:
        try:
            est = analysis.estimate_threshold(ratio, args.sizes, args.trials, seed=args.seed,
                                              workers=args.workers, coarse=args.coarse)
        except analysis.NoCrossingError as exc:
            analysis.write_csv(rows, out)
            sys.stderr.write(f"qns threshold: {exc}\n")
            return EXIT_NO_CROSSING
        estimates.append(est)
        rows += est.rows
    analysis.write_csv(rows, out)
    points = [(e.ratio, e.eps_t, e.uncertainty) for e in estimates]
    report = {"points": [{"ratio": r, "eps_t": t, "uncertainty": u, "channel_error_rate": 0.75 * t}
                         for r, t, u in points]}
    if len({p[0] for p in points}) >= 2:
        report["fit"] = json.loads(analysis.fit_threshold_line(points).to_json())
    text = json.dumps(report, sort_keys=True) + "\n"
    if args.fit_output:
        with open(args.fit_output, "w") as fh:
            fh.write(text)
    else:
        sys.stderr.write(text)
    return EXIT_OK


def cmd_faults(args, out) -> int:
    noise = PhysicalNoise(args.q, args.p, args.pm)
    table = enumerate_fault_table(noise, byproduct_faults=args.byproduct_faults)
    closed = full_rates(noise)
    out.write(f"{'sector':<7}{'quantity':<18}{'closed_form':>14}{'derived':>14}\n")
    for sector in ("Z", "X"):
        derived = table.rates(sector)
        for name in ("eps_S", "eps_E", "eps_C"):
            out.write(f"{sector:<7}{name:<18}{getattr(closed, name):>14.6g}{getattr(derived, name):>14.6g}\n")
        for cls in CLASSES:
            out.write(f"{sector:<7}{'class ' + cls:<18}{'':>14}{table.sectors[sector].classes[cls]:>14.6g}\n")
    return EXIT_OK


def cmd_rate_calc(args, out) -> int:
    attempt = args.attempt_time if args.attempt_time else args.window / args.attempts
    success, ebits = analysis.entanglement_rate(args.distance_km, args.attenuation, attempt,
                                                args.window, args.rounds)
    out.write(json.dumps({"success_prob": success, "ebits_per_s": ebits,
                          "eps_long": analysis.long_chain_error(args.nodes, args.rounds, args.kappa)},
                         sort_keys=True) + "\n")
    return EXIT_OK


COMMANDS = {"rates": cmd_rates, "simulate": cmd_simulate, "threshold": cmd_threshold,
            "faults": cmd_faults, "rate-calc": cmd_rate_calc}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ConfigError as exc:
        sys.stderr.write(f"qns: {exc}\n")
        return EXIT_CONFIG
    except OSError as exc:
        sys.stderr.write(f"qns: {exc}\n")
        return EXIT_IO
    if args.dump_config:
        sys.stdout.write(_run_config(args).to_toml())
        return EXIT_OK
    path = getattr(args, "output", None)
    try:
        out = open(path, "w", newline="") if path else sys.stdout
    except OSError as exc:
        sys.stderr.write(f"qns: {exc}\n")
        return EXIT_IO
    try:
        return COMMANDS[args.command](args, out)
    except ValueError as exc:
        sys.stderr.write(f"qns: {exc}\n")
        return EXIT_CONFIG
    except OSError as exc:
        sys.stderr.write(f"qns: {exc}\n")
        return EXIT_IO
    finally:
        if path:
            out.close()


if __name__ == "__main__":
    sys.exit(main())
