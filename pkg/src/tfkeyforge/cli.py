"""Command-line interface: simulate, keyrate, sweep and optimize.

Exit codes: 0 on success (a zero key length is a success), 2 for invalid
input, 3 for an internal numerical failure. Output files are written only
once complete.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional

from . import __version__
from .channel import expected_counts, plob
from .config import (
    RunConfig,
    canonical_json,
    config_sha256,
    counts_to_dict,
    load_config,
    load_counts,
    write_atomic,
)
from .errors import ConfigError, TFKeyForgeError
from .optimizer import SearchSpace, optimize
from .pipeline import evaluate, key_rate_from_counts
from .protocol import KeyRateResult, ProtocolParams

log = logging.getLogger("tfkeyforge")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

SWEEP_COLUMNS = (
    "loss_db",
    "rate",
    "plob",
    "e_ph_upper",
    "key_length",
    "e_x",
    "alpha2",
    "mu0",
    "mu1",
    "mu2",
    "p_x",
    "p_mu0",
    "p_mu1",
    "p_mu2",
    "evaluations",
    "reason",
)


def params_to_dict(p: ProtocolParams) -> Dict[str, Any]:
    it = p.intensities
    return {
        "n_rounds": p.n_rounds,
        "alpha": p.alpha,
        "alpha2": p.alpha2,
        "p_x": p.p_x,
        "mu0": it.mu0,
        "mu1": it.mu1,
        "mu2": it.mu2,
        "p_mu0": it.p_mu0,
        "p_mu1": it.p_mu1,
        "p_mu2": it.p_mu2,
        "s_cut": p.s_cut,
    }


def result_to_dict(res: KeyRateResult) -> Dict[str, Any]:
    return {
        "n_ph_upper": res.n_ph_upper,
        "e_ph_upper": res.e_ph_upper,
        "key_length": res.key_length,
        "rate": res.rate,
        "n_rounds": res.n_rounds,
        "reason": res.reason,
        "diagnostics": dict(res.diagnostics),
    }


def _envelope(cfg: RunConfig, body: Dict[str, Any]) -> str:
    doc = dict(body)
    doc["config_sha256"] = config_sha256(cfg)
    doc["tool_version"] = __version__
    return canonical_json(doc)


def _eval_kwargs(cfg: RunConfig) -> Dict[str, Any]:
    return {"convention": cfg.intensity_convention, "compat": cfg.compat}


def _plob_db(loss_db: float) -> float:
    return plob(10.0 ** (-loss_db / 10.0))


def cmd_simulate(cfg: RunConfig, loss_db: Optional[float], out: str) -> int:
    ch = cfg.channel if loss_db is None else cfg.channel.with_loss(loss_db)
    counts = expected_counts(cfg.protocol, ch, cfg.intensity_convention)
    meta = {
        "loss_db": ch.loss_db,
        "intensity_convention": cfg.intensity_convention,
        "config_sha256": config_sha256(cfg),
    }
    write_atomic(out, canonical_json(counts_to_dict(counts, meta)))
    return EXIT_OK


def cmd_keyrate(cfg: RunConfig, counts_path: str, out: str) -> int:
    counts, meta = load_counts(counts_path)
    loss_db = meta.get("loss_db")
    predicted = None
    if isinstance(loss_db, (int, float)) and not isinstance(loss_db, bool):
        # the pre-run prediction tunes the vacuum Kato bound
        ch = cfg.channel.with_loss(float(loss_db))
        predicted = expected_counts(cfg.protocol, ch, meta.get("intensity_convention", cfg.intensity_convention))
    res = key_rate_from_counts(counts, cfg.protocol, cfg.security, cfg.channel.f, predicted, compat=cfg.compat)
    body = {"params": params_to_dict(cfg.protocol), "result": result_to_dict(res)}
    if predicted is not None:
        body["loss_db"] = float(loss_db)
        body["plob"] = _plob_db(float(loss_db))
    write_atomic(out, _envelope(cfg, body))
    return EXIT_OK


def _search_space(cfg: RunConfig) -> SearchSpace:
    return SearchSpace(mu2=cfg.mu2, s_cut=cfg.protocol.s_cut)


def _run_optimize(cfg: RunConfig, loss_db: float, budget: int, seed: int):
    ch = cfg.channel.with_loss(loss_db)
    return optimize(
        ch, cfg.protocol.n_rounds, cfg.security, _search_space(cfg), budget=budget, seed=seed, **_eval_kwargs(cfg)
    )


def cmd_optimize(cfg: RunConfig, loss_db: Optional[float], budget: int, seed: int, out: str) -> int:
    loss = cfg.channel.loss_db if loss_db is None else loss_db
    best = _run_optimize(cfg, loss, budget, seed)
    body = {
        "loss_db": loss,
        "plob": _plob_db(loss),
        "budget": budget,
        "seed": seed,
        "evaluations": best.evaluations,
        "params": params_to_dict(best.params),
        "result": result_to_dict(best.result),
    }
    write_atomic(out, _envelope(cfg, body))
    return EXIT_OK


def sweep_losses(from_db: float, to_db: float, step_db: float) -> List[float]:
    """Loss grid ``from_db, from_db + step_db, ...`` up to ``to_db`` inclusive."""
    if not (math.isfinite(from_db) and math.isfinite(to_db) and math.isfinite(step_db)):
        raise ConfigError.single("sweep", "sweep bounds must be finite")
    if step_db <= 0 or to_db < from_db:
        raise ConfigError.single("sweep", f"need step_db > 0 and to_db >= from_db, got {from_db}, {to_db}, {step_db}")
    n = int(math.floor((to_db - from_db) / step_db + 1e-9)) + 1
    return [from_db + i * step_db for i in range(n)]


def sweep_point(cfg_dict: Dict[str, Any], loss_db: float, do_optimize: bool, budget: int, seed: int) -> Dict[str, Any]:
    """One sweep row; numerical failures become zero-rate rows."""
    cfg = RunConfig.from_dict(cfg_dict)
    params = cfg.protocol
    evaluations = 1
    try:
        if do_optimize:
            best = _run_optimize(cfg, loss_db, budget, seed)
            params, res, evaluations = best.params, best.result, best.evaluations
        else:
            res = evaluate(params, cfg.channel.with_loss(loss_db), cfg.security, **_eval_kwargs(cfg))
    except (ArithmeticError, TFKeyForgeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        res = KeyRateResult.zero(params.n_rounds, f"numeric failure: {exc}")
    it = params.intensities
    return {
        "loss_db": loss_db,
        "rate": res.rate,
        "plob": _plob_db(loss_db),
        "e_ph_upper": res.e_ph_upper,
        "key_length": res.key_length,
        "e_x": res.diagnostics.get("e_x", math.nan),
        "alpha2": params.alpha2,
        "mu0": it.mu0,
        "mu1": it.mu1,
        "mu2": it.mu2,
        "p_x": params.p_x,
        "p_mu0": it.p_mu0,
        "p_mu1": it.p_mu1,
        "p_mu2": it.p_mu2,
        "evaluations": evaluations,
        "reason": res.reason or "",
    }


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(float(v))
    if hasattr(v, "item"):
        return _fmt(v.item())
    return str(v)


def rows_to_csv(rows: List[Dict[str, Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in SWEEP_COLUMNS])
    return buf.getvalue()


def cmd_sweep(
    cfg: RunConfig,
    losses: List[float],
    do_optimize: bool,
    budget: int,
    seed: int,
    jobs: int,
    out: str,
) -> int:
    d = cfg.to_dict()
    args = [(d, loss, do_optimize, budget, seed) for loss in losses]
    if jobs > 1 and len(losses) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            # map yields in submission order, so rows stay in loss order
            rows = list(pool.map(sweep_point, *zip(*args)))
    else:
        rows = [sweep_point(*a) for a in args]
    write_atomic(out, rows_to_csv(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tfkeyforge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", required=True, help="output path")
        p.add_argument("--eps-budget", choices=("compat", "strict"), help="override modes.eps_budget")
        p.add_argument(
            "--intensity-convention", choices=("intensity", "amplitude"), help="override modes.intensity_convention"
        )

    p = sub.add_parser("simulate", help="write expected counts for one loss value")
    common(p)
    p.add_argument("--loss-db", type=float, help="total loss in dB (default: channel.loss_db)")

    p = sub.add_parser("keyrate", help="certified key length for a counts file")
    common(p)
    p.add_argument("--counts", required=True, help="counts file written by 'simulate'")

    p = sub.add_parser("sweep", help="key rate against loss as CSV")
    common(p)
    p.add_argument("--from-db", type=float)
    p.add_argument("--to-db", type=float)
    p.add_argument("--step-db", type=float)
    p.add_argument("--no-optimize", action="store_true", help="evaluate the configured parameters as given")
    p.add_argument("--budget", type=int, help="evaluations per loss point")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")

    p = sub.add_parser("optimize", help="optimize protocol settings at one loss value")
    common(p)
    p.add_argument("--loss-db", type=float)
    p.add_argument("--budget", type=int)
    p.add_argument("--seed", type=int)
    return parser


def _pick(cli_value, cfg_value, name: str):
    v = cli_value if cli_value is not None else cfg_value
    if v is None:
        raise ConfigError.single("schema", f"{name} must be given on the command line or in the config")
    return v


def _check_seed(seed: int) -> int:
    if not 0 <= seed < 2**64:
        raise ConfigError.single("seed", f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.eps_budget or args.intensity_convention:
        cfg = cfg.with_modes(args.eps_budget, args.intensity_convention)
    if args.command == "simulate":
        return cmd_simulate(cfg, args.loss_db, args.out)
    if args.command == "keyrate":
        return cmd_keyrate(cfg, args.counts, args.out)
    budget = _pick(args.budget, cfg.budget, "budget")
    if budget < 1:
        raise ConfigError.single("budget", f"budget must be >= 1, got {budget}")
    seed = _check_seed(_pick(args.seed, cfg.seed, "seed"))
    if args.command == "optimize":
        return cmd_optimize(cfg, args.loss_db, budget, seed, args.out)
    sw = cfg.sweep
    losses = sweep_losses(
        float(_pick(args.from_db, sw.get("from_db"), "from_db")),
        float(_pick(args.to_db, sw.get("to_db"), "to_db")),
        float(_pick(args.step_db, sw.get("step_db"), "step_db")),
    )
    do_optimize = not args.no_optimize and bool(sw.get("optimize", True))
    if args.jobs < 1:
        raise ConfigError.single("jobs", f"jobs must be >= 1, got {args.jobs}")
    return cmd_sweep(cfg, losses, do_optimize, budget, seed, args.jobs, args.out)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return run(args)
    except ConfigError as exc:
        for issue in exc.issues:
            print(f"error: {issue}", file=sys.stderr)
        return EXIT_INPUT
    except (ArithmeticError, TFKeyForgeError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
