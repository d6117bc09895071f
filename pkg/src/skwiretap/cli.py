"""Command-line front end: ``sk-wiretap {bounds,simulate,leakage,verify}``.

Exit codes: 0 success, 2 configuration error, 3 bound-scan overflow,
4 violated assertion.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _rng
from .bounds import BoundReport, ScanOverflowError, TargetSpec, UpperMode, bracket, reference_power
from .leakage import LeakageProfile, leakage_profile
from .numerics import DomainError
from .schemes import REFERENCE_PARAMS, ChannelParams, MonteCarloReport, Variant, exact_excess_probability, monte_carlo_excess_sweep
from .verify import CheckResult, berry_esseen_suite, mgf_suite, moments_suite

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_OVERFLOW = 3
EXIT_ASSERTION = 4

MODES = ("classic", "modified", "upper_exact", "upper_asymptotic")
SUITES = ("mgf", "moments", "berry_esseen")
DEFAULT_TRIALS = {"simulate": 10**6, "mgf": 10**7, "moments": 10**6, "berry_esseen": 10**6}
REFERENCE_D_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))
UNITS_LINE = "# units: nats"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    params: ChannelParams = REFERENCE_PARAMS
    epsilon: float = 1e-5
    delta: float = 0.01
    d_grid: tuple = REFERENCE_D_GRID
    modes: tuple = MODES
    output_path: str | None = None
    seed: int | None = None

    def __post_init__(self):
        if not self.d_grid:
            raise ConfigError("d_grid must be nonempty")
        if any(b <= a for a, b in zip(self.d_grid, self.d_grid[1:])):
            raise ConfigError("d_grid must be strictly increasing")
        if any(not 0.0 < d < self.params.sigma_s2 for d in self.d_grid):
            raise ConfigError(f"every d must lie in (0, sigma_s2 = {self.params.sigma_s2})")
        if not self.modes:
            raise ConfigError("modes must be nonempty")
        bad = [m for m in self.modes if m not in MODES]
        if bad:
            raise ConfigError(f"unknown mode(s) {bad}; expected a subset of {list(MODES)}")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError("epsilon must lie in (0, 1)")
        if not self.delta > 0.0:
            raise ConfigError("delta must be positive")
        if self.seed is not None:
            try:
                _rng.check_seed(self.seed)
            except (TypeError, ValueError) as exc:
                raise ConfigError(str(exc)) from None

    @property
    def upper_mode(self) -> UpperMode:
        if "upper_asymptotic" in self.modes and "upper_exact" not in self.modes:
            return UpperMode.ASYMPTOTIC_F1
        return UpperMode.EXACT


_FLOAT_KEYS = ("sigma_s2", "sigma_eta2", "sigma_e2", "sigma_e2_tilde", "P", "epsilon", "delta")
_ALL_KEYS = _FLOAT_KEYS + ("d_grid", "modes", "seed", "output")


def _parse_float(text: str, where: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{where}: not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{where}: value must be finite, got {text!r}")
    return value


def parse_config(text: str, source: str = "<config>") -> SweepConfig:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values: dict = {}
    lines: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        lines[key] = where
        if key in _FLOAT_KEYS:
            values[key] = _parse_float(value, where)
        elif key == "d_grid":
            items = [s.strip() for s in value.split(",") if s.strip()]
            values[key] = tuple(_parse_float(s, where) for s in items)
        elif key == "modes":
            values[key] = tuple(s.strip() for s in value.split(",") if s.strip())
        elif key == "seed":
            try:
                values[key] = int(value)
            except ValueError:
                raise ConfigError(f"{where}: seed must be an integer, got {value!r}") from None
        else:
            values[key] = value

    base = SweepConfig()
    try:
        params = ChannelParams(**{k: values.get(k, getattr(base.params, k)) for k in _FLOAT_KEYS[:5]})
    except DomainError as exc:
        key = next((k for k in _FLOAT_KEYS[:5] if k in str(exc)), None)
        raise ConfigError(f"{lines.get(key, source)}: {exc}") from None
    kwargs = dict(params=params)
    for key, attr in (("epsilon", "epsilon"), ("delta", "delta"), ("d_grid", "d_grid"), ("modes", "modes"),
                      ("seed", "seed"), ("output", "output_path")):
        if key in values:
            kwargs[attr] = values[key]
    try:
        return SweepConfig(**kwargs)
    except ConfigError as exc:
        key = next((k for k in ("d_grid", "modes", "epsilon", "delta", "seed") if k in str(exc)), None)
        raise ConfigError(f"{lines.get(key, source)}: {exc}") from None


def load_config(path: str | None) -> SweepConfig:
    if path is None:
        return SweepConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    return parse_config(text, path)


def fmt(x) -> str:
    """12 significant digits for reals; integers and strings verbatim."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def _write_csv(header_lines: list[str], columns: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    for h in header_lines:
        buf.write(h + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def _read_csv(text: str) -> tuple[dict, list[dict]]:
    meta = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
        else:
            body.append(line)
    return meta, list(csv.DictReader(body))


BOUNDS_COLUMNS = ["d", "rate_lower_classic", "rate_lower_modified", "rate_upper", "ntilde1", "ntilde2", "n2", "n3", "n1",
                  "binding_classic", "binding_modified"]


def bounds_csv(reports: list[BoundReport], config: SweepConfig) -> str:
    mode = reports[0].mode if reports else config.upper_mode
    header = [UNITS_LINE, f"# upper_mode: {mode.value}", f"# epsilon: {fmt(config.epsilon)}",
              f"# delta: {fmt(config.delta)}"]
    if mode is UpperMode.ASYMPTOTIC_F1:
        header.append("# approximate: upper bound drops the unspecified O(sqrt(N')) remainder of F1")
    rows = [[r.d, r.rate_lower_classic, r.rate_lower_modified, r.rate_upper, r.ntilde1, r.ntilde2, r.n2, r.n3, r.n1,
             r.binding["classic"], r.binding["modified"]] for r in reports]
    return _write_csv(header, BOUNDS_COLUMNS, rows)


def bracket_violations(reports: list[BoundReport]) -> list[BoundReport]:
    """Grid points where the upper rate falls below either lower rate."""
    return [r for r in reports if r.rate_upper < max(r.rate_lower_classic, r.rate_lower_modified)]


def read_bounds_csv(text: str) -> list[BoundReport]:
    meta, rows = _read_csv(text)
    mode = UpperMode(meta.get("upper_mode", "exact"))
    return [
        BoundReport(
            d=float(r["d"]),
            ntilde1=int(r["ntilde1"]),
            ntilde2=int(r["ntilde2"]),
            n2=int(r["n2"]),
            n3=int(r["n3"]),
            n1=int(r["n1"]),
            rate_lower_classic=float(r["rate_lower_classic"]),
            rate_lower_modified=float(r["rate_lower_modified"]),
            rate_upper=float(r["rate_upper"]),
            binding={"classic": r["binding_classic"], "modified": r["binding_modified"]},
            mode=mode,
        )
        for r in rows
    ]


SIMULATE_COLUMNS = ["variant", "N", "d", "trials", "hits", "estimate", "ci_halfwidth", "exact", "seed"]


def simulate_csv(variant: Variant, N: int, ds, reports: list[MonteCarloReport], params: ChannelParams) -> str:
    rows = [[variant.value, N, d, r.trials, r.hits, r.estimate, r.ci_halfwidth,
             exact_excess_probability(variant, params, N, d), r.seed] for d, r in zip(ds, reports)]
    return _write_csv(["# units: probability"], SIMULATE_COLUMNS, rows)


def read_simulate_csv(text: str) -> list[tuple[str, int, float, MonteCarloReport]]:
    _, rows = _read_csv(text)
    return [
        (r["variant"], int(r["N"]), float(r["d"]),
         MonteCarloReport(int(r["trials"]), int(r["hits"]), float(r["estimate"]), float(r["ci_halfwidth"]), int(r["seed"])))
        for r in rows
    ]


LEAKAGE_COLUMNS = ["N", "exact_leakage", "f2_bound", "margin"]


def leakage_csv(profile: LeakageProfile) -> str:
    rows = [[n, e, f, f - e] for n, (e, f) in enumerate(zip(profile.exact, profile.f2), 1)]
    return _write_csv([UNITS_LINE, f"# variant: {profile.variant.value}"], LEAKAGE_COLUMNS, rows)


def read_leakage_csv(text: str) -> LeakageProfile:
    meta, rows = _read_csv(text)
    return LeakageProfile(
        N_max=len(rows),
        exact=[float(r["exact_leakage"]) for r in rows],
        f2=[float(r["f2_bound"]) for r in rows],
        variant=Variant(meta["variant"]),
    )


VERIFY_COLUMNS = ["name", "observed", "expected", "tolerance", "verdict"]


def verify_csv(results: list[CheckResult]) -> str:
    rows = [[c.name, c.observed, c.expected, c.tolerance, "PASS" if c.passed else "FAIL"] for c in results]
    return _write_csv([UNITS_LINE], VERIFY_COLUMNS, rows)


def read_verify_csv(text: str) -> list[CheckResult]:
    _, rows = _read_csv(text)
    return [CheckResult(r["name"], float(r["observed"]), float(r["expected"]), float(r["tolerance"]),
                        r["verdict"] == "PASS") for r in rows]


def run_bounds(config: SweepConfig, mode=None, workers: int = 1) -> list[BoundReport]:
    mode = config.upper_mode if mode is None else UpperMode(mode)
    return [bracket(config.params, TargetSpec(d, config.epsilon, config.delta), mode) for d in config.d_grid]


def run_simulate(config: SweepConfig, variant, N: int, trials: int, seed: int, workers: int = 1) -> list[MonteCarloReport]:
    return monte_carlo_excess_sweep(variant, config.params, N, config.d_grid, trials, seed, workers)


def run_leakage(config: SweepConfig, variant, N_max: int, workers: int = 1) -> LeakageProfile:
    return leakage_profile(variant, config.params, N_max, workers)


def run_verify(config: SweepConfig, suite: str, trials: int | None, seed: int, workers: int = 1) -> list[CheckResult]:
    suites = SUITES if suite == "all" else (suite,)
    p_prime = reference_power(config.params, config.epsilon)
    runners = {"mgf": mgf_suite, "moments": moments_suite, "berry_esseen": berry_esseen_suite}
    out = []
    for i, name in enumerate(suites):
        n = trials if trials is not None else DEFAULT_TRIALS[name]
        sub_seed = _rng.derive_seed(seed, i)
        out.extend(runners[name](p_prime, config.params.sigma_eta2, n, sub_seed, workers))
    return out


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sk-wiretap", description="Secure SK feedback JSCC over the AWGN wiretap channel.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--out", help="output CSV path (default: config 'output' or stdout)")
    common.add_argument("--workers", type=_positive_int, default=1, help="worker threads")

    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, help="unsigned 64-bit seed; generated and printed if absent")
    seeded.add_argument("--trials", type=_positive_int, help="Monte Carlo trials")

    variant = argparse.ArgumentParser(add_help=False)
    variant.add_argument("--variant", choices=[v.value for v in Variant], help="scheme variant")

    p = sub.add_parser("bounds", parents=[common], help="rate bounds over the distortion grid")
    p.add_argument("--mode", choices=[m.value for m in UpperMode], help="converse evaluation mode")

    p = sub.add_parser("simulate", parents=[common, seeded, variant], help="Monte Carlo excess-distortion probability")
    p.add_argument("--n", type=_positive_int, default=50, help="blocklength N")

    p = sub.add_parser("leakage", parents=[common, variant], help="exact leakage against the analytic bound")
    p.add_argument("--nmax", type=_positive_int, default=200, help="largest blocklength")

    p = sub.add_parser("verify", parents=[common, seeded], help="numerical checks of the converse ingredients")
    p.add_argument("--suite", default="all", help=f"one of {', '.join(SUITES)}, all")
    return parser


def _default_variant(config: SweepConfig) -> Variant:
    if "classic" in config.modes and "modified" not in config.modes:
        return Variant.CLASSIC
    return Variant.MODIFIED


def _resolve_seed(args, config: SweepConfig) -> int:
    seed = args.seed if args.seed is not None else config.seed
    if seed is None:
        seed = _rng.fresh_seed()
        print(f"seed: {seed}", file=sys.stderr)
    try:
        return _rng.check_seed(seed)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"--seed: {exc}") from None


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        out = args.out if args.out is not None else config.output_path
        if args.command == "bounds":
            reports = run_bounds(config, args.mode, args.workers)
            for r in bracket_violations(reports):
                print(f"warning: rate_upper {fmt(r.rate_upper)} is below a lower bound at d={fmt(r.d)}", file=sys.stderr)
            _emit(bounds_csv(reports, config), out)
            return EXIT_OK
        if args.command == "simulate":
            v = Variant(args.variant) if args.variant else _default_variant(config)
            seed = _resolve_seed(args, config)
            trials = args.trials or DEFAULT_TRIALS["simulate"]
            reports = run_simulate(config, v, args.n, trials, seed, args.workers)
            _emit(simulate_csv(v, args.n, config.d_grid, reports, config.params), out)
            return EXIT_OK
        if args.command == "leakage":
            v = Variant(args.variant) if args.variant else _default_variant(config)
            profile = run_leakage(config, v, args.nmax, args.workers)
            _emit(leakage_csv(profile), out)
            if v is Variant.MODIFIED:
                bad = [n for n, (e, f) in enumerate(zip(profile.exact, profile.f2), 1) if f - e < 0.0]
                if bad:
                    print(f"leakage exceeds the analytic bound at N = {bad}", file=sys.stderr)
                    return EXIT_ASSERTION
            return EXIT_OK
        if args.command == "verify":
            if args.suite not in SUITES + ("all",):
                raise ConfigError(f"--suite: unknown suite {args.suite!r}; expected one of {', '.join(SUITES)}, all")
            seed = _resolve_seed(args, config)
            results = run_verify(config, args.suite, args.trials, seed, args.workers)
            _emit(verify_csv(results), out)
            failed = [c.name for c in results if not c.passed]
            if failed:
                print(f"failed checks: {', '.join(failed)}", file=sys.stderr)
                return EXIT_ASSERTION
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ScanOverflowError as exc:
        print(f"scan overflow: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
