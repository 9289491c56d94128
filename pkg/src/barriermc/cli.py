"""Command line front end: ``barriermc {price,correct,convergence,beta1,check}``.

Settings are resolved as built-in defaults, then the JSON ``--config`` file, then
explicit flags. Data goes to stdout (or ``--out``); progress goes to stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import __version__
from .bessel import (
    DEFAULT_GRID_STEP,
    DEFAULT_J,
    DEFAULT_SAMPLES,
    BesselBetaEstimate,
    cached_beta1,
    estimate_beta1,
    save_beta1,
)
from .checks import run_check_suite
from .correction import CorrectionMode, corrected_continuous_price, corrected_discrete_price
from .model import (
    BarrierOptionSpec,
    Direction,
    JumpDiffusionParams,
    Knock,
    KouJumpParams,
    OptionKind,
    ParameterError,
    RebateConvention,
)
from .pricing import price_continuous, price_discrete

log = logging.getLogger("barriermc")

CSV_HEADER = [
    "n",
    "discrete_price",
    "discrete_stderr",
    "corrected_price",
    "corrected_stderr",
    "continuous_ref",
    "rel_err_discrete",
    "rel_err_corrected",
]
BETA1_SOURCES = ("cached", "recompute", "pinned")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class ExperimentConfig:
    """Flat, JSON-serialisable description of one run.

    Defaults are the up-and-out put with rebate used throughout the documentation.
    """

    r: float = 0.05
    delta: float = 0.0
    sigma: float = 0.3
    lam: float = 7.0
    p: float = 0.6
    eta1: float = 50.0
    eta2: float = 25.0
    kind: str = "put"
    direction: str = "up"
    knock: str = "out"
    strike: float = 100.0
    barrier: float = 110.0
    rebate: float = 10.0
    maturity: float = 1.0
    spot: float = 100.0
    ns: list = field(default_factory=lambda: [5, 10, 25])
    n_paths: int = 200_000
    seed: int = 20240601
    mode: str = CorrectionMode.CONTINUOUS_FROM_DISCRETE.value
    rebate_convention: str = RebateConvention.HIT.value
    beta1_source: str = "cached"
    beta1_value: float | None = None
    beta1_J: int = DEFAULT_J
    beta1_grid_step: float = DEFAULT_GRID_STEP
    beta1_samples: int = DEFAULT_SAMPLES
    continuous_ref: float | None = None
    out: str | None = None
    format: str = "json"

    # --- validation -------------------------------------------------------

    def validate(self) -> "ExperimentConfig":
        _check_types(self)
        for name, allowed in [
            ("kind", [k.value for k in OptionKind]),
            ("direction", [d.value for d in Direction]),
            ("knock", [k.value for k in Knock]),
            ("mode", [m.value for m in CorrectionMode]),
            ("rebate_convention", [c.value for c in RebateConvention]),
            ("beta1_source", list(BETA1_SOURCES)),
            ("format", ["csv", "json"]),
        ]:
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name}: {getattr(self, name)!r} not in {allowed}")
        if any(n < 1 for n in self.ns):
            raise ConfigError("ns: monitoring counts must be >= 1")
        if self.n_paths < 2:
            raise ConfigError("n_paths: need at least 2 paths")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed: must be an unsigned 64-bit integer")
        if self.beta1_source == "pinned" and not (self.beta1_value and self.beta1_value > 0):
            raise ConfigError("beta1_value: a positive value is required when beta1_source is 'pinned'")
        if self.beta1_J < 0 or self.beta1_samples < 1 or not self.beta1_grid_step > 0:
            raise ConfigError("beta1_J/beta1_samples/beta1_grid_step: out of range")
        try:
            self.model()
        except ParameterError as exc:
            raise ConfigError(f"model parameters: {exc}") from exc
        try:
            self.spec()
        except ParameterError as exc:
            raise ConfigError(f"option spec: {exc}") from exc
        return self

    # --- conversions ------------------------------------------------------

    def model(self) -> JumpDiffusionParams:
        return JumpDiffusionParams(self.r, self.delta, self.sigma, self.lam, KouJumpParams(self.p, self.eta1, self.eta2))

    def spec(self) -> BarrierOptionSpec:
        return BarrierOptionSpec(
            OptionKind(self.kind),
            Direction(self.direction),
            Knock(self.knock),
            self.strike,
            self.barrier,
            self.rebate,
            self.maturity,
            self.spot,
        )

    def convention(self) -> RebateConvention:
        return RebateConvention(self.rebate_convention)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"{unknown[0]}: unknown config field")
        cfg = cls(**d)
        return cfg.validate()

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)


_TYPES = {
    float: (int, float),
    int: (int,),
    str: (str,),
    list: (list,),
}


def _check_types(cfg: ExperimentConfig) -> None:
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        ann = f.type if isinstance(f.type, str) else f.type.__name__
        optional = "None" in ann
        if val is None:
            if optional:
                continue
            raise ConfigError(f"{f.name}: must not be null")
        base = ann.split("|")[0].strip()
        expected = {"float": float, "int": int, "str": str, "list": list}[base]
        if isinstance(val, bool) or not isinstance(val, _TYPES[expected]):
            raise ConfigError(f"{f.name}: expected {base}, got {type(val).__name__}")
        if expected is float:
            setattr(cfg, f.name, float(val))
    if not all(isinstance(n, int) and not isinstance(n, bool) for n in cfg.ns):
        raise ConfigError("ns: expected a list of integers")


# --- commands ---------------------------------------------------------------


def resolve_beta1(cfg: ExperimentConfig, threads: int = 1) -> BesselBetaEstimate:
    if cfg.beta1_source == "pinned":
        return BesselBetaEstimate.pinned(cfg.beta1_value)
    if cfg.beta1_source == "recompute":
        log.info("estimating beta1 (J=%d, %d samples)", cfg.beta1_J, cfg.beta1_samples)
        return estimate_beta1(cfg.beta1_J, cfg.beta1_grid_step, cfg.beta1_samples, cfg.seed, threads)
    return cached_beta1(threads=threads)


def _rel(a: float, ref: float) -> float:
    return abs(a - ref) / abs(ref) if ref else float("nan")


def run_price(cfg: ExperimentConfig, n: int | None, threads: int = 1) -> dict:
    model, spec = cfg.model(), cfg.spec()
    if n is None:
        est = price_continuous(model, spec, cfg.n_paths, cfg.seed, cfg.convention(), threads)
    else:
        est = price_discrete(model, spec, n, cfg.n_paths, cfg.seed, cfg.convention(), threads)
    return {**est.to_dict(), "n": n}


def run_correct(cfg: ExperimentConfig, n: int, threads: int = 1) -> dict:
    beta1 = resolve_beta1(cfg, threads)
    fn = (
        corrected_discrete_price
        if CorrectionMode(cfg.mode) is CorrectionMode.DISCRETE_FROM_CONTINUOUS
        else corrected_continuous_price
    )
    est = fn(cfg.model(), cfg.spec(), n, cfg.n_paths, cfg.seed, beta1, cfg.convention(), threads)
    return {
        **est.to_dict(),
        "n": n,
        "mode": cfg.mode,
        "shifted_barrier": est.extra["shifted_barrier"],
        "beta1_used": est.extra["beta1_used"],
    }


def run_convergence_table(cfg: ExperimentConfig, threads: int = 1) -> list[dict]:
    """One row per ``n``.

    ``continuous_from_discrete``: the corrected price is the discrete price at the
    inward barrier and both relative errors are measured against the continuous
    reference. ``discrete_from_continuous``: the corrected price is the continuous
    price at the outward barrier; the errors of the corrected price and of the plain
    continuous reference are measured against the discrete price.
    """
    if not cfg.ns:
        return []
    model, spec, conv = cfg.model(), cfg.spec(), cfg.convention()
    beta1 = resolve_beta1(cfg, threads)
    if cfg.continuous_ref is not None:
        ref = cfg.continuous_ref
    else:
        log.info("continuous reference, %d paths", cfg.n_paths)
        ref = price_continuous(model, spec, cfg.n_paths, cfg.seed, conv, threads).mean
    to_discrete = CorrectionMode(cfg.mode) is CorrectionMode.DISCRETE_FROM_CONTINUOUS
    rows = []
    for n in cfg.ns:
        log.info("n=%d", n)
        disc = price_discrete(model, spec, n, cfg.n_paths, cfg.seed, conv, threads)
        if to_discrete:
            corr = corrected_discrete_price(model, spec, n, cfg.n_paths, cfg.seed, beta1, conv, threads)
            err_d, err_c = _rel(ref, disc.mean), _rel(corr.mean, disc.mean)
        else:
            corr = corrected_continuous_price(model, spec, n, cfg.n_paths, cfg.seed, beta1, conv, threads)
            err_d, err_c = _rel(disc.mean, ref), _rel(corr.mean, ref)
        rows.append(
            {
                "n": n,
                "discrete_price": disc.mean,
                "discrete_stderr": disc.stderr,
                "corrected_price": corr.mean,
                "corrected_stderr": corr.stderr,
                "continuous_ref": ref,
                "rel_err_discrete": err_d,
                "rel_err_corrected": err_c,
            }
        )
    return rows


# --- output -----------------------------------------------------------------


def _csv_text(rows: list[dict], header: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items() if k in header})
    return buf.getvalue()


def _provenance(cfg: ExperimentConfig, command: str) -> dict:
    return {"command": command, "version": __version__, "config": cfg.to_dict()}


def emit(cfg: ExperimentConfig, command: str, result, header: list[str] | None = None) -> None:
    """Write ``result`` in the configured format, embedding config and version.

    JSON output carries the provenance inline; CSV output written to a file gets a
    ``<out>.meta.json`` sidecar so the table itself keeps its fixed schema.
    """
    meta = _provenance(cfg, command)
    if cfg.format == "json":
        text = json.dumps({**meta, "result": result}, indent=2, sort_keys=True) + "\n"
    else:
        rows = result if isinstance(result, list) else [result]
        text = _csv_text(rows, header or sorted(rows[0]))
    if cfg.out:
        Path(cfg.out).write_text(text)
        if cfg.format == "csv":
            Path(cfg.out + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        log.info("wrote %s", cfg.out)
    else:
        sys.stdout.write(text)


# --- argument handling --------------------------------------------------------


def _int_list(text: str) -> list[int]:
    text = text.strip()
    return [int(t) for t in text.split(",") if t.strip()] if text else []


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat JSON config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--paths", type=int, dest="n_paths")
    common.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--rebate-convention", choices=[c.value for c in RebateConvention])
    common.add_argument("--beta1", type=float, dest="beta1_value", help="pin beta1 to this value")
    common.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="barriermc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"barriermc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", parents=[common], help="price one option")
    p.add_argument("--n", type=int, help="monitoring dates (omit for continuous)")

    p = sub.add_parser("correct", parents=[common], help="continuity-corrected price")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mode", choices=[m.value for m in CorrectionMode])

    p = sub.add_parser("convergence", parents=[common], help="discrete/corrected table over n")
    p.add_argument("--n", type=_int_list, dest="ns", help="comma-separated monitoring counts")
    p.add_argument("--mode", choices=[m.value for m in CorrectionMode])
    p.add_argument("--continuous-ref", type=float)

    p = sub.add_parser("beta1", parents=[common], help="estimate and cache beta1")
    p.add_argument("--J", type=int, dest="beta1_J")
    p.add_argument("--grid-step", type=float, dest="beta1_grid_step")
    p.add_argument("--samples", type=int, dest="beta1_samples")
    p.add_argument("--no-save", action="store_true", help="do not update the cache")

    p = sub.add_parser("check", parents=[common], help="run the invariant suite")
    p.add_argument("--perturb-drift", type=float, default=0.0, help="offset added to the drift (sensitivity test)")
    return parser


_FLAG_FIELDS = (
    "seed",
    "n_paths",
    "out",
    "format",
    "rebate_convention",
    "beta1_value",
    "mode",
    "ns",
    "continuous_ref",
    "beta1_J",
    "beta1_grid_step",
    "beta1_samples",
)


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """defaults < config file < flags."""
    d = asdict(ExperimentConfig())
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        d.update(asdict(ExperimentConfig.from_json(text)))
    for name in _FLAG_FIELDS:
        val = getattr(args, name, None)
        if val is not None:
            d[name] = val
    if getattr(args, "beta1_value", None) is not None:
        d["beta1_source"] = "pinned"
    return ExperimentConfig.from_dict(d)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"barriermc: config error: {exc}", file=sys.stderr)
        return 2
    threads = max(1, args.threads)

    if args.command == "price":
        emit(cfg, "price", run_price(cfg, args.n, threads))
    elif args.command == "correct":
        emit(cfg, "correct", run_correct(cfg, args.n, threads))
    elif args.command == "convergence":
        emit(cfg, "convergence", run_convergence_table(cfg, threads), CSV_HEADER)
    elif args.command == "beta1":
        est = estimate_beta1(cfg.beta1_J, cfg.beta1_grid_step, cfg.beta1_samples, cfg.seed, threads)
        if not args.no_save:
            log.info("cached beta1 at %s", save_beta1(est))
        emit(cfg, "beta1", est.to_dict())
    elif args.command == "check":
        model, spec = cfg.model(), cfg.spec()
        results = run_check_suite(model, spec, cfg.seed, cfg.n_paths, args.perturb_drift)
        emit(cfg, "check", [{"check": c.name, "passed": c.passed, "detail": c.detail} for c in results],
             ["check", "passed", "detail"])
        for c in results:
            log.info(c.line())
        return 0 if all(c.passed for c in results) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
