"""Batch front-end: flat key=value configs, solve/simulate/sweep/value/demo.

Every command is a pure function of (config, seed): repeated runs write
byte-identical artifacts. Exit codes: 0 success, 1 config error, 2 numerical
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import io
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .choquet import CptValue, cpt_scaled_position
from .dist import (
    DeterministicRate,
    DiscreteEmpirical,
    Distribution,
    GaussianSqrtTRate,
    Normal,
    RateModel,
)
from .errors import ConfigError, NumericalError
from .prefs import CptPreferences
from .simulate import inconsistency_demo, paths_to_csv, simulate_paths, summary_to_csv
from .solver import Constraints, PolicyTable, SolverSettings, backward_induction

__all__ = [
    "RunConfig",
    "parse_config",
    "load_config",
    "serialize_config",
    "config_hash",
    "run_solve",
    "run_simulate",
    "run_sweep",
    "run_value",
    "run_demo",
    "main",
]

SWEEP_PARAMS = ("alpha", "mu", "sigma", "delta", "rate-mode")
RATE_MODES = ("fixed", "sqrt_t")


@dataclass(frozen=True)
class RunConfig:
    """Validated run parameters; defaults encode the baseline calibration."""

    alpha: float = 0.88
    lam: float = 2.20
    gamma: float = 0.61  # documented default; override with the gamma key
    delta: float = 0.69
    lo_frac: float = -5.0
    hi_frac: float = 5.0
    mu: float | tuple = 0.045  # scalar, or one value per period
    sigma: float | tuple = 1.69
    atom_file: str | None = None
    rate_model: str = "sqrt_t"
    rate: float | None = None
    rate_base: float = 0.03
    rate_vol: float = 0.003
    horizon: int = 10
    w0: float = 0.8
    grid_points: int = 1001
    z_tol: float = 1e-6
    y_nodes: int = 64
    r_nodes: int = 16
    cdf_tol: float = 1e-9
    n_paths: int = 10000
    seed: int = 42
    out_dir: str = "out"

    def validate(self) -> None:
        req = _require
        for key in ("alpha", "lambda", "gamma", "delta", "lo_frac", "hi_frac", "mu",
                    "sigma", "rate", "rate_base", "rate_vol", "w0", "z_tol", "cdf_tol"):
            val = getattr(self, _SCHEMA[key][0])
            if val is None:
                continue
            vals = val if isinstance(val, tuple) else (val,)
            req(all(np.isfinite(v) for v in vals), f"{key} must be finite")
        req(0.0 < self.alpha < 1.0, "alpha must satisfy 0 < alpha < 1")
        req(self.lam > 1.0, "lambda must satisfy lambda > 1")
        req(0.28 < self.gamma < 1.0, "gamma must satisfy 0.28 < gamma < 1")
        req(0.28 < self.delta < 1.0, "delta must satisfy 0.28 < delta < 1")
        req(
            self.alpha < 2.0 * min(self.gamma, self.delta),
            "alpha must satisfy alpha < 2*min(gamma, delta)",
        )
        req(self.lo_frac <= 0.0 < self.hi_frac, "fraction bounds must satisfy lo_frac <= 0 < hi_frac")
        for key in ("mu", "sigma"):
            val = getattr(self, key)
            if isinstance(val, tuple):
                req(
                    len(val) == self.horizon,
                    f"{key} schedule must have one value per period (horizon = {self.horizon})",
                )
        for s in self.sigma if isinstance(self.sigma, tuple) else (self.sigma,):
            req(s > 0.0, "sigma must be > 0")
        req(self.rate_model in RATE_MODES, f"rate_model must be one of {RATE_MODES}")
        if self.rate_model == "fixed":
            req(self.rate is not None, "missing required key: rate (needed when rate_model = fixed)")
        if self.rate is not None:
            req(self.rate > -1.0, "rate must be > -1")
        req(self.rate_base > -1.0, "rate_base must be > -1")
        req(self.rate_vol >= 0.0, "rate_vol must be >= 0")
        req(self.horizon >= 1, "horizon must be >= 1")
        req(self.grid_points >= 2, "grid_points must be >= 2")
        req(self.z_tol > 0.0, "z_tol must be > 0")
        req(self.y_nodes >= 1, "y_nodes must be >= 1")
        req(self.r_nodes >= 1, "r_nodes must be >= 1")
        req(self.cdf_tol > 0.0, "cdf_tol must be > 0")
        req(self.n_paths >= 1, "n_paths must be >= 1")
        req(self.seed >= 0, "seed must be >= 0")
        req(bool(self.out_dir), "out_dir must be non-empty")

    def preferences(self) -> CptPreferences:
        return CptPreferences.create(self.alpha, self.lam, self.gamma, self.delta)

    def constraints(self) -> Constraints:
        return Constraints(self.lo_frac, self.hi_frac)

    def y_schedule(self) -> list[Distribution]:
        """One return distribution per period; stationary unless scheduled."""
        # An atom file, when set, takes precedence over mu/sigma.
        if self.atom_file is not None:
            try:
                return [DiscreteEmpirical.from_csv(self.atom_file)] * self.horizon
            except (OSError, ValueError) as exc:
                raise ConfigError(f"atom_file: {exc}") from exc
        mus = self.mu if isinstance(self.mu, tuple) else (self.mu,) * self.horizon
        sigmas = self.sigma if isinstance(self.sigma, tuple) else (self.sigma,) * self.horizon
        return [Normal(m, s) for m, s in zip(mus, sigmas)]

    def y_distribution(self) -> Distribution:
        """The first period's return distribution (value and demo commands)."""
        return self.y_schedule()[0]

    def rate_model_obj(self) -> RateModel:
        if self.rate_model == "fixed":
            return DeterministicRate(self.rate)
        return GaussianSqrtTRate(self.rate_base, self.rate_vol)

    def solver_settings(self) -> SolverSettings:
        return SolverSettings(
            grid_points=self.grid_points,
            z_tol=self.z_tol,
            y_nodes=self.y_nodes,
            r_nodes=self.r_nodes,
            cdf_tol=self.cdf_tol,
        )


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _float(s: str) -> float:
    return float(s)


def _float_or_schedule(s: str):
    if "," not in s:
        return float(s)
    parts = [p.strip() for p in s.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty schedule")
    return tuple(float(p) for p in parts)


def _int(s: str) -> int:
    return int(s)


def _str(s: str) -> str:
    return s


# key -> (RunConfig field, caster); also fixes the canonical serialization order.
_SCHEMA: dict[str, tuple[str, object]] = {
    "alpha": ("alpha", _float),
    "lambda": ("lam", _float),
    "gamma": ("gamma", _float),
    "delta": ("delta", _float),
    "lo_frac": ("lo_frac", _float),
    "hi_frac": ("hi_frac", _float),
    "mu": ("mu", _float_or_schedule),
    "sigma": ("sigma", _float_or_schedule),
    "atom_file": ("atom_file", _str),
    "rate_model": ("rate_model", _str),
    "rate": ("rate", _float),
    "rate_base": ("rate_base", _float),
    "rate_vol": ("rate_vol", _float),
    "horizon": ("horizon", _int),
    "w0": ("w0", _float),
    "grid_points": ("grid_points", _int),
    "z_tol": ("z_tol", _float),
    "y_nodes": ("y_nodes", _int),
    "r_nodes": ("r_nodes", _int),
    "cdf_tol": ("cdf_tol", _float),
    "n_paths": ("n_paths", _int),
    "seed": ("seed", _int),
    "out_dir": ("out_dir", _str),
}


def parse_config(text: str) -> RunConfig:
    """Parse flat 'key = value' lines with # comments into a valid RunConfig."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, _, val = stripped.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key: {key}")
        if key in raw:
            raise ConfigError(f"duplicate config key: {key}")
        if not val:
            raise ConfigError(f"empty value for key: {key}")
        raw[key] = val

    kwargs = {}
    for key, val in raw.items():
        field_name, cast = _SCHEMA[key]
        try:
            kwargs[field_name] = cast(val)
        except ValueError as exc:
            raise ConfigError(f"invalid value for {key}: {exc}") from exc
    cfg = RunConfig(**kwargs)
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    """Read a config file; a relative atom_file is resolved against it."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    cfg = parse_config(text)
    if cfg.atom_file is not None and not Path(cfg.atom_file).is_absolute():
        cfg = dataclasses.replace(cfg, atom_file=str(path.parent / cfg.atom_file))
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form: every set key, schema order, shortest float repr."""
    lines = []
    for key, (field_name, _) in _SCHEMA.items():
        v = getattr(cfg, field_name)
        if v is None:
            continue
        if isinstance(v, tuple):
            lines.append(f"{key} = {','.join(repr(x) for x in v)}")
        elif isinstance(v, float):
            lines.append(f"{key} = {v!r}")
        else:
            lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _out_dir(cfg: RunConfig, override: str | None) -> Path:
    out = Path(override) if override else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _solve_table(cfg: RunConfig) -> PolicyTable:
    return backward_induction(
        cfg.preferences(),
        cfg.constraints(),
        cfg.rate_model_obj(),
        cfg.y_schedule(),
        cfg.horizon,
        cfg.solver_settings(),
    )


def worker_count() -> int:
    """Worker pool size, capped by the CPT_ALLOC_THREADS environment variable."""
    n = os.cpu_count() or 1
    cap = os.environ.get("CPT_ALLOC_THREADS")
    if cap is not None:
        try:
            n = min(n, int(cap))
        except ValueError as exc:
            raise ConfigError(f"CPT_ALLOC_THREADS must be an integer: {exc}") from exc
    return max(1, n)


def run_solve(cfg: RunConfig, out_dir: str | None = None) -> Path:
    """Solve the policy and write policy.csv with a provenance header."""
    table = _solve_table(cfg)
    buf = io.StringIO()
    buf.write(f"# config_sha256 = {config_hash(cfg)}\n")
    table.to_csv(buf)
    target = _out_dir(cfg, out_dir) / "policy.csv"
    _write_atomic(target, buf.getvalue())
    return target


def run_simulate(cfg: RunConfig, out_dir: str | None = None) -> list[Path]:
    """Solve, simulate the path ensemble, and write policy/paths/summary CSVs."""
    table = _solve_table(cfg)
    paths, summary = simulate_paths(
        table, cfg.rate_model_obj(), cfg.y_schedule(), cfg.w0, cfg.n_paths, cfg.seed
    )
    out = _out_dir(cfg, out_dir)
    written = []

    buf = io.StringIO()
    buf.write(f"# config_sha256 = {config_hash(cfg)}\n")
    table.to_csv(buf)
    _write_atomic(out / "policy.csv", buf.getvalue())
    written.append(out / "policy.csv")

    buf = io.StringIO()
    paths_to_csv(paths, buf)
    _write_atomic(out / "paths.csv", buf.getvalue())
    written.append(out / "paths.csv")

    buf = io.StringIO()
    summary_to_csv(summary, buf)
    _write_atomic(out / "summary.csv", buf.getvalue())
    written.append(out / "summary.csv")
    return written


def _sweep_variant(cfg: RunConfig, param: str, value) -> RunConfig:
    if param == "rate-mode":
        if value not in RATE_MODES:
            raise ConfigError(f"rate-mode grid values must be one of {RATE_MODES}, got {value!r}")
        rate = cfg.rate if cfg.rate is not None else cfg.rate_base
        variant = dataclasses.replace(cfg, rate_model=value, rate=rate)
    else:
        field_name = _SCHEMA[param][0]
        try:
            variant = dataclasses.replace(cfg, **{field_name: float(value)})
        except ValueError as exc:
            raise ConfigError(f"invalid {param} grid value {value!r}: {exc}") from exc
    variant.validate()
    return variant


def run_sweep(cfg: RunConfig, param: str, grid: list, out_dir: str | None = None) -> Path:
    """Re-solve per grid value and tabulate every period's coefficients."""
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"sweep param must be one of {SWEEP_PARAMS}, got {param!r}")
    if not grid:
        raise ConfigError("sweep grid must be non-empty")
    variants = [_sweep_variant(cfg, param, v) for v in grid]  # validate all first

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        tables = list(pool.map(_solve_table, variants))

    buf = io.StringIO()
    buf.write("param_value,t,kStar,kHatStar,A_t,B_t\n")
    for value, table in zip(grid, tables):
        label = value if isinstance(value, str) else f"{float(value):.17g}"
        for row in table.rows:
            buf.write(
                f"{label},{row.t},{row.k_star:.17g},{row.k_hat_star:.17g},"
                f"{row.a_coef:.17g},{row.b_coef:.17g}\n"
            )
    safe = param.replace("-", "_")
    target = _out_dir(cfg, out_dir) / f"sweep_{safe}.csv"
    _write_atomic(target, buf.getvalue())
    return target


def run_value(cfg: RunConfig, amount: float) -> CptValue:
    """Prospect value of holding `amount` dollars of the configured return."""
    return cpt_scaled_position(cfg.preferences(), cfg.y_distribution(), amount, cfg.cdf_tol)


def run_demo(
    cfg: RunConfig,
    r_low: float,
    r_high: float,
    grid_points: int,
    out_dir: str | None = None,
) -> Path:
    """Run the two-period precommitment demo and write its report."""
    y = cfg.y_distribution()
    if not isinstance(y, DiscreteEmpirical):
        raise ConfigError("demo requires a finite return distribution (set atom_file)")
    if grid_points < 3:
        raise ConfigError(f"demo grid must have at least 3 points, got {grid_points}")
    report = inconsistency_demo(
        cfg.preferences(), cfg.constraints(), y, r_low, r_high, grid_points
    )
    target = _out_dir(cfg, out_dir) / "demo_report.txt"
    _write_atomic(target, report.to_text())
    return target


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); config errors map to 1
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="cpt-alloc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="config file (defaults are used if omitted)")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides out_dir)")

    p = sub.add_parser("solve", help="write the optimal policy table")
    common(p)

    p = sub.add_parser("simulate", help="solve, then simulate a wealth-path ensemble")
    common(p)
    p.add_argument("--seed", type=int, metavar="N", help="override the simulation seed")

    p = sub.add_parser("sweep", help="re-solve across a parameter grid")
    common(p)
    p.add_argument("--param", required=True, metavar="NAME", help=f"one of {', '.join(SWEEP_PARAMS)}")
    p.add_argument("--grid", required=True, metavar="v1,v2,...", help="comma-separated grid values")

    p = sub.add_parser("value", help="prospect value of a dollar position in the return")
    common(p)
    p.add_argument("--amount", type=float, default=1.0, metavar="X", help="position size in dollars")

    p = sub.add_parser("demo", help="two-period precommitment demo (finite return required)")
    common(p)
    p.add_argument("--r-low", type=float, default=0.0, metavar="R")
    p.add_argument("--r-high", type=float, default=0.5, metavar="R")
    p.add_argument("--demo-grid", type=int, default=21, metavar="N")

    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        cfg = load_config(args.config) if args.config else RunConfig()
        if getattr(args, "seed", None) is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
            cfg.validate()

        if args.command == "solve":
            print(run_solve(cfg, args.out))
        elif args.command == "simulate":
            for path in run_simulate(cfg, args.out):
                print(path)
        elif args.command == "sweep":
            grid = [v.strip() for v in args.grid.split(",") if v.strip()]
            print(run_sweep(cfg, args.param, grid, args.out))
        elif args.command == "value":
            result = run_value(cfg, args.amount)
            print(f"value = {result.value:.17g}")
            print(f"gain_part = {result.gain_part:.17g}")
            print(f"loss_part = {result.loss_part:.17g}")
        elif args.command == "demo":
            print(run_demo(cfg, args.r_low, args.r_high, args.demo_grid, args.out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
