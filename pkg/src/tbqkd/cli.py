"""Command-line front end: attenuation sweeps to CSV and the oracle suites.

Configuration comes from a flat ``key=value`` file (``--config``) and is
overridden by command-line flags.  Exit codes: 0 success, 1 configuration
error, 2 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .channel import ChannelParams
from .decoy import FiniteKeyEpsilons, IntensitySettings, KeyRateBreakdown
from .optimize import ParamSpace, evaluate, optimize_sweep
from .verify import verify_decoy_bounds, verify_estimators

SCHEMA_VERSION = 1
MODES = ("single-photon", "wcp-decoy", "verify-bounds", "verify-estimators")

BREAKDOWN_COLUMNS = (
    "key_length",
    "key_rate",
    "ex_upper",
    "ez_upper",
    "qber_z",
    "d0_z_lower",
    "d1_z_lower",
    "gamma_term",
    "lambda_ec",
    "n_z",
    "aborted",
)
REFERENCE_COLUMNS = ("p_z", "key_length", "key_rate", "ex_upper", "ez_upper", "qber_z")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (parser, default)
FIELDS = {
    "mode": (str, "single-photon"),
    "att_start": (float, 0.0),
    "att_stop": (float, 60.0),
    "att_step": (float, 2.0),
    "rounds": (int, 10**8),
    "seed": (int, 0),
    "optimize": (_bool, True),
    "out": (str, "-"),
    "e_mis": (float, 0.01),
    "p_dc": (float, 1e-10),
    "det_eff": (float, 1.0),
    "eps_sec": (float, 1e-9),
    "eps_cor": (float, 1e-9),
    "mu1": (float, 0.6),
    "mu2": (float, 0.2),
    "p_mu1": (float, 0.5),
    "p_z": (float, 0.9),
    "reference": (_bool, False),
    "workers": (int, 1),
    "attacks": (int, 1000),
    "trials": (int, 1000),
    "eps_test": (float, 0.1),
    "tol": (float, 1e-10),
}


@dataclass(frozen=True)
class RunConfig:
    mode: str
    att_start: float
    att_stop: float
    att_step: float
    rounds: int
    seed: int
    optimize: bool
    out: str
    e_mis: float
    p_dc: float
    det_eff: float
    eps_sec: float
    eps_cor: float
    mu1: float
    mu2: float
    p_mu1: float
    p_z: float
    reference: bool
    workers: int
    attacks: int
    trials: int
    eps_test: float
    tol: float

    def channel(self, attenuation_db: float = 0.0) -> ChannelParams:
        return ChannelParams(attenuation_db, self.p_dc, self.e_mis, self.det_eff)

    def epsilons(self) -> FiniteKeyEpsilons:
        return FiniteKeyEpsilons(self.eps_sec, self.eps_cor)

    def settings(self) -> IntensitySettings:
        return IntensitySettings(self.mu1, self.mu2, self.p_mu1)

    def attenuations(self) -> list[float]:
        n = int(math.floor((self.att_stop - self.att_start) / self.att_step + 1e-9)) + 1
        return [round(self.att_start + i * self.att_step, 10) for i in range(max(n, 0))]


def read_config_file(path: str) -> dict[str, str]:
    raw = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}", "expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in FIELDS:
                raise ConfigError(key, "unknown setting")
            raw[key] = value
    return raw


def build_config(raw: dict) -> RunConfig:
    values = {}
    for key, (parse, default) in FIELDS.items():
        if key not in raw or raw[key] is None:
            values[key] = default
            continue
        try:
            values[key] = parse(raw[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(key, str(exc)) from None
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.mode not in MODES:
        raise ConfigError("mode", f"must be one of {', '.join(MODES)}")
    if not cfg.att_step > 0:
        raise ConfigError("att_step", "must be > 0")
    if not 0 <= cfg.att_start <= cfg.att_stop:
        raise ConfigError("att_stop", "need 0 <= att_start <= att_stop")
    for key in ("rounds", "workers", "attacks", "trials"):
        if getattr(cfg, key) < 1:
            raise ConfigError(key, "must be positive")
    for key in ("eps_sec", "eps_cor", "eps_test"):
        if not 0 < getattr(cfg, key) <= 1:
            raise ConfigError(key, "must lie in (0, 1]")
    try:
        cfg.channel()
    except ValueError as exc:
        raise ConfigError(str(exc).split(" ", 1)[0], str(exc)) from None
    if not 0 < cfg.p_z < 1:
        raise ConfigError("p_z", "must lie in (0, 1)")
    if cfg.mode in ("wcp-decoy", "verify-bounds"):
        if not 0 < cfg.mu1 <= 1:
            raise ConfigError("mu1", "must lie in (0, 1]")
        if not 0 < cfg.mu2 < cfg.mu1:
            raise ConfigError("mu2", "must lie in (0, mu1)")
        if not 0 < cfg.p_mu1 < 1:
            raise ConfigError("p_mu1", "must lie in (0, 1)")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "item"):
        return _fmt(v.item())
    return "" if v is None else str(v)


def _breakdown_cells(b: KeyRateBreakdown) -> dict:
    return {
        "key_length": float(b.key_length),
        "key_rate": float(b.key_rate),
        "ex_upper": float(b.d1_ex_upper),
        "ez_upper": float(b.d1_ez_upper),
        "qber_z": float(b.qber_z),
        "d0_z_lower": float(b.d0_z_lower),
        "d1_z_lower": float(b.d1_z_lower),
        "gamma_term": float(b.gamma_term),
        "lambda_ec": float(b.lambda_ec),
        "n_z": float(b.n_z),
        "aborted": b.aborted,
    }


def _columns(cfg: RunConfig) -> list[str]:
    cols = ["schema_version", "attenuation_db", "mode", "mu1", "mu2", "p_mu1", "p_z", *BREAKDOWN_COLUMNS]
    refs = []
    if cfg.mode == "single-photon":
        refs = ["bb84"]
    elif cfg.reference:
        refs = ["three_bin", "bb84"]
    for r in refs:
        cols += [f"{r}_{c}" for c in REFERENCE_COLUMNS]
    return cols


def _fixed_point(args):
    params, channel, rounds, epsilons, scheme = args
    return evaluate(params, channel, rounds, epsilons, scheme)


def _scheme_rows(cfg: RunConfig, scheme: str) -> list[tuple[dict, KeyRateBreakdown]]:
    atts = cfg.attenuations()
    eps = cfg.epsilons()
    if cfg.optimize:
        res = optimize_sweep(atts, cfg.channel(), cfg.rounds, eps, ParamSpace(), scheme)
        return [(r.params, r.breakdown) for r in res]
    if scheme == "wcp-decoy":
        params = {"mu1": cfg.mu1, "mu2": cfg.mu2, "p_mu1": cfg.p_mu1, "p_z": cfg.p_z}
    else:
        params = {"p_z": cfg.p_z}
    jobs = [(params, cfg.channel(a), cfg.rounds, eps, scheme) for a in atts]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            out = list(pool.map(_fixed_point, jobs))
    else:
        out = [_fixed_point(j) for j in jobs]
    return [(dict(params), b) for b in out]


def run_sweep(cfg: RunConfig) -> list[dict]:
    """One row per attenuation, in attenuation order."""
    main_scheme = "three-bin" if cfg.mode == "single-photon" else "wcp-decoy"
    main = _scheme_rows(cfg, main_scheme)
    refs = {}
    if cfg.mode == "single-photon":
        refs["bb84"] = _scheme_rows(cfg, "bb84")
    elif cfg.reference:
        refs["three_bin"] = _scheme_rows(cfg, "three-bin")
        refs["bb84"] = _scheme_rows(cfg, "bb84")
    rows = []
    for i, att in enumerate(cfg.attenuations()):
        params, b = main[i]
        row = {
            "schema_version": SCHEMA_VERSION,
            "attenuation_db": float(att),
            "mode": cfg.mode,
            "mu1": params.get("mu1"),
            "mu2": params.get("mu2"),
            "p_mu1": params.get("p_mu1"),
            "p_z": params["p_z"],
        }
        row.update(_breakdown_cells(b))
        for name, series in refs.items():
            rp, rb = series[i]
            cells = _breakdown_cells(rb)
            cells["p_z"] = rp["p_z"]
            for c in REFERENCE_COLUMNS:
                row[f"{name}_{c}"] = cells[c]
        rows.append(row)
    return rows


def write_csv(rows: list[dict], columns: list[str], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tbqkd", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="flat key=value settings file")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--att-start", type=str)
    p.add_argument("--att-stop", type=str)
    p.add_argument("--att-step", type=str)
    p.add_argument("--rounds", type=str)
    p.add_argument("--seed", type=str)
    p.add_argument("--optimize", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--out", help="CSV path, '-' for stdout")
    p.add_argument("--reference", action=argparse.BooleanOptionalAction, default=None,
                   help="add single-photon reference columns in wcp-decoy mode")
    for key in ("e_mis", "p_dc", "det_eff", "eps_sec", "eps_cor", "mu1", "mu2", "p_mu1", "p_z",
                "workers", "attacks", "trials", "eps_test", "tol"):
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=str)
    return p


def config_from_args(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    raw = read_config_file(args.config) if args.config else {}
    for key in FIELDS:
        v = getattr(args, key, None)
        if v is not None:
            raw[key] = v
    return build_config(raw)


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"config error: config: {exc}", file=sys.stderr)
        return 1

    if cfg.mode == "verify-estimators":
        report = verify_estimators(cfg.attacks, cfg.seed, cfg.tol)
        print("\n".join(report.lines()))
        return 0 if report.passed else 2
    if cfg.mode == "verify-bounds":
        report = verify_decoy_bounds(
            cfg.channel(cfg.att_start), cfg.settings(), cfg.p_z, cfg.rounds, cfg.trials, cfg.eps_test, cfg.seed
        )
        print("\n".join(report.lines()))
        return 0 if report.passed else 2

    if cfg.out == "-":
        write_csv(run_sweep(cfg), _columns(cfg), sys.stdout)
        return 0
    try:
        fh = open(cfg.out, "w", encoding="utf-8", newline="")
    except OSError as exc:
        print(f"config error: out: {exc}", file=sys.stderr)
        return 1
    with fh:
        write_csv(run_sweep(cfg), _columns(cfg), fh)
    return 0


if __name__ == "__main__":
    sys.exit(main())
