"""Batch command line: ``levy-atm {price,asymptotics,verify}``.

Exit codes: 0 ok, 2 bad configuration, 3 numerical failure, 4 unmet
assumptions for a pure-jump prediction, 5 a verification check failed.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, pricing, verify
from .errors import AssumptionViolation, ConfigError, LevyAtmError
from .presets import load_config, model_from_config
from .regvar import KINDS

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ASSUMPTION, EXIT_CHECK = 0, 2, 3, 4, 5


@dataclass
class RunConfig:
    command: str
    model: dict
    t_lo: float = 1e-8
    t_hi: float = 1e-2
    ppd: int = 4
    seed: int = 0
    mc_n: int = 0
    scaling: str = "debruijn_numeric"
    checks: Optional[list] = None
    out: str = "out"
    force: bool = False
    workers: int = 1
    check_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.t_lo > 0 and self.t_hi > 0 and self.t_lo < self.t_hi):
            raise ConfigError(f"need 0 < t_lo < t_hi, got ({self.t_lo}, {self.t_hi})")
        if int(self.ppd) != self.ppd or self.ppd < 1:
            raise ConfigError("points per decade must be an integer >= 1")
        if self.mc_n < 0 or self.workers < 1:
            raise ConfigError("mc_n must be >= 0 and workers >= 1")
        if self.scaling not in KINDS or self.scaling == "closed_form":
            raise ConfigError(f"scaling must be 'debruijn_numeric' or 'maller_mason_inf', got {self.scaling!r}")
        if self.checks is not None:
            bad = [c for c in self.checks if c not in verify.CHECKS]
            if bad:
                raise ConfigError(f"unknown checks {bad}; expected a subset of {sorted(verify.CHECKS)}")

    def t_grid(self) -> np.ndarray:
        lo, hi = math.log10(self.t_lo), math.log10(self.t_hi)
        n = max(1, int(round((hi - lo) * self.ppd)))
        return 10.0 ** np.linspace(lo, hi, n + 1)

    def hashed_part(self) -> dict:
        # everything that can change an output number; paths and thread counts cannot
        d = asdict(self)
        for k in ("out", "workers", "force"):
            d.pop(k)
        d["version"] = __version__
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.hashed_part(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else {}
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    model = dict(cfg.get("model", {}))
    if args.preset:
        model["preset"] = args.preset
    for key in ("alpha", "sigma"):
        if getattr(args, key) is not None:
            model[key] = getattr(args, key)
    if "preset" not in model:
        raise ConfigError("no model preset given (use --preset or a config file with model.preset)")
    grid = cfg.get("grid", {})
    checks = cfg.get("checks")
    if args.checks is not None:
        checks = [c.strip() for c in args.checks.split(",") if c.strip()]

    def pick(flag, key, default, src=cfg):
        return flag if flag is not None else src.get(key, default)

    try:
        rc = RunConfig(
            command=args.command, model=model,
            t_lo=float(pick(args.t_lo, "lo", 1e-8, grid)), t_hi=float(pick(args.t_hi, "hi", 1e-2, grid)),
            ppd=int(pick(args.ppd, "ppd", 4, grid)), seed=int(pick(args.seed, "seed", 0)),
            mc_n=int(pick(args.mc_n, "mc_n", 0)), scaling=str(pick(args.scaling, "scaling", "debruijn_numeric")),
            checks=checks, out=str(pick(args.out, "out", "out")), force=bool(args.force),
            workers=int(pick(args.workers, "workers", 1)), check_params=dict(cfg.get("check_params", {})))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return rc


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _dump(obj) -> str:
    return json.dumps(verify._jsonable(obj), indent=2, sort_keys=True) + "\n"


def _manifest(rc: RunConfig, outputs, started: float, extra=None) -> str:
    # "run" holds the only fields allowed to differ between identical runs
    m = {"config": verify._jsonable(asdict(rc)), "config_hash": rc.config_hash(), "version": __version__,
         "outputs": sorted(outputs),
         "run": {"wall_time_s": time.time() - started,
                 "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}}
    if extra:
        m.update(extra)
    return _dump(m)


def _setup(model, rc: RunConfig):
    if model.sigma > 0:
        return None
    return pricing.first_order_setup(model, rc.scaling, t_ref=rc.t_lo)


def cmd_price(rc: RunConfig, started: float) -> int:
    model = model_from_config(rc.model)
    setup = _setup(model, rc)
    curve = pricing.price_curve(model, rc.t_grid(), setup and setup.scaling, setup and setup.law,
                                mc_n=rc.mc_n, seed=rc.seed, workers=rc.workers, config_hash=rc.config_hash())
    out = Path(rc.out)
    _write(out / "prices.csv", curve.to_csv())
    _write(out / "manifest.json", _manifest(rc, ["prices.csv"], started))
    print(f"wrote {out / 'prices.csv'} ({len(curve.maturities)} maturities)")
    return EXIT_OK


ASYMPTOTICS_HEADER = ("t", "B_t", "E_Zplus", "prediction", "ivol_prediction", "lambda_eff")


def cmd_asymptotics(rc: RunConfig, started: float) -> int:
    model = model_from_config(rc.model)
    ts = rc.t_grid()
    meta = {"config_hash": rc.config_hash(), "model": model.name}
    if model.sigma > 0:
        pred, _ = pricing.predict_first_order(pricing.WITH_BROWNIAN, ts, sigma=model.sigma)
        ivp, _ = pricing.predict_implied_vol(pricing.WITH_BROWNIAN, ts, sigma=model.sigma)
        bt = np.sqrt(ts)
        ez = 1.0 / math.sqrt(2.0 * math.pi) * model.sigma
        lam = np.full_like(ts, math.nan)
        meta.update(model_class=pricing.WITH_BROWNIAN, assumptions=None)
    else:
        setup = _setup(model, rc)
        try:
            pred, summary = pricing.predict_first_order(pricing.PURE_JUMP, ts, setup.scaling, setup.law,
                                                        model=model, force=rc.force)
        except AssumptionViolation as exc:
            print(f"asymptotics: {exc}", file=sys.stderr)
            return EXIT_ASSUMPTION
        ivp = math.sqrt(2.0 * math.pi) * pred / np.sqrt(ts)
        bt = setup.scaling(ts)
        ez = pricing.expected_positive_part(setup.law)
        lam = np.array([setup.scaling.lambda_eff(t) for t in ts])
        failed = sorted(k for k, v in summary.items() if not v)
        meta.update(model_class=pricing.PURE_JUMP, assumptions=summary, alpha=setup.alpha,
                    p_plus=setup.p_plus, scaling=rc.scaling,
                    forced=bool(failed), failed_assumptions=failed)
    buf = io.StringIO()
    buf.write(f"# config_hash: {rc.config_hash()}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ASYMPTOTICS_HEADER)
    for row in zip(ts, bt, [ez] * len(ts), pred, ivp, lam):
        w.writerow(["%.17g" % float(v) for v in row])
    out = Path(rc.out)
    _write(out / "asymptotics.csv", buf.getvalue())
    _write(out / "asymptotics.json", _dump(meta))
    _write(out / "manifest.json", _manifest(rc, ["asymptotics.csv", "asymptotics.json"], started))
    if meta.get("forced"):
        print(f"warning: prediction forced despite failed assumptions {meta['failed_assumptions']}")
    print(f"wrote {out / 'asymptotics.csv'}")
    return EXIT_OK


def cmd_verify(rc: RunConfig, started: float) -> int:
    model = model_from_config(rc.model)
    names = list(verify.DEFAULT_CHECKS) if rc.checks is None else rc.checks
    params = {k: dict(v) for k, v in rc.check_params.items()}
    if "convergence" in names:
        params.setdefault("convergence", {}).setdefault("t_grid", rc.t_grid().tolist())
        params["convergence"].setdefault("scaling", rc.scaling)
    if "concentration" in names:
        params.setdefault("concentration", {}).setdefault("seed", rc.seed)
    reports = verify.run_checks(model, names, params)
    out = Path(rc.out)
    payload = [dict(r.to_dict(), config_hash=rc.config_hash()) for r in reports]
    _write(out / "reports.json", _dump(payload))
    _write(out / "manifest.json", _manifest(rc, ["reports.json"], started))
    print(verify.format_table(reports))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK


COMMANDS = {"price": cmd_price, "asymptotics": cmd_asymptotics, "verify": cmd_verify}


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="levy-atm", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--preset", help="model preset (overrides the config)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--t-lo", type=float, dest="t_lo")
    p.add_argument("--t-hi", type=float, dest="t_hi")
    p.add_argument("--ppd", type=int, help="maturities per decade")
    p.add_argument("--seed", type=int)
    p.add_argument("--mc-n", type=int, dest="mc_n", help="Monte Carlo paths per maturity (0 = off)")
    p.add_argument("--scaling", choices=["debruijn_numeric", "maller_mason_inf"])
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--force", action="store_true", help="predict even when assumptions fail")
    p.add_argument("--checks", help="comma-separated verification checks ('' for none)")
    return p


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    started = time.time()
    try:
        rc = build_config(args)
        return COMMANDS[rc.command](rc, started)
    except ConfigError as exc:
        print(f"{args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssumptionViolation as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (LevyAtmError, ArithmeticError, ValueError) as exc:
        print(f"{args.command}: numerical failure in {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
