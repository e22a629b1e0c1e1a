#!/usr/bin/env python3
"""
Concentration Lab - Main Entry Point

Command-line front end for numerical checks of concentration-of-measure
bounds: closed-form bound curves, seeded samplers, Monte Carlo verification
of bound curves, order-statistic envelopes, random embeddings, the Gaussian
convex-order check and the random-rotation experiment. The `serve` command
starts the FastAPI backend.

Features:
- JSON experiment configs with seed/trials overrides
- Reports written as CSV, JSON and SVG into --out
- Worker pool and chunk size taken from lab_config.json
- Exit code 0 when every pass flag holds, 1 when one fails, 2 on errors

Usage:
    python main.py bound eval --bound lpn_gauss --params '{"n": 1024, "p": 1}' --t 1 2 3
    python main.py sample --law normal --n 5 --m 3 --seed 7
    python main.py verify experiment.json --seed 11 --trials 20000 --out reports
    python main.py orderstats --n 200 --t 2 --trials 10000
    python main.py embed --n 200 --k 3 --eps 0.25 --trials 500
    python main.py pisier --f linear --phi square --n 10 --trials 1000000
    python main.py rotate --n 500 --q 6 --g first_coordinate
    python main.py serve

Arguments:
    --seed N: Root seed (default: lab_config.json seed)
    --trials N: Monte Carlo trials (default: per command)
    --out DIR: Output directory for reports (default: lab_config.json output_dir)
    --calibration FILE: JSON file of calibration constants
    --verbose: Debug logging
"""

import argparse
import json
import logging
import math
import os
import sys
from typing import Any, Dict, List, Optional

from lab.bounds import CalibrationSet, make_curve
from lab.distributions import resolve_law, sample, sample_ball_q
from lab.embed import (EmbeddingSpec, body_from_id, exponential_recipe, gaussian_dvoretzky,
                       verify_embedding)
from lab.errors import LabError
from lab.harness import ExperimentConfig, emit_report, experiment_random_rotation, pisier_check, verify_bound
from lab.order_stats import envelope_coverage, order_sum_bound, order_sum_coverage, uniform_order_envelope
from utils.config_manager import ConfigManager
from utils.headless_utils import headless_progress_bar
from utils.reports import render_sample_csv, write_curve_csv, write_sample_csv

# Configuration constants
BACKEND_PORT = 9000
BACKEND_HOST = "0.0.0.0"
CONFIG_FILE = "lab_config.json"

logger = logging.getLogger(__name__)


def load_calibration(lab_config: Dict[str, Any], path: Optional[str]) -> CalibrationSet:
    """
    Calibration constants from the lab config, overridden by an optional JSON file.

    Args:
        lab_config (Dict[str, Any]): Loaded lab configuration
        path (Optional[str]): Path given with --calibration

    Returns:
        CalibrationSet: Merged constants
    """
    entries = dict(lab_config.get("calibration") or {})
    if path:
        with open(path) as f:
            entries.update(json.load(f))
    return CalibrationSet.from_dict(entries)


def write_reports(report, out_dir: str, formats: List[str], stem: Optional[str] = None) -> None:
    for fmt in formats:
        emit_report(report, fmt, out_dir, stem)


def cmd_bound_eval(args, lab_config: Dict[str, Any], calib: CalibrationSet) -> int:
    curve = make_curve(args.bound, json.loads(args.params), calib)
    rows = curve.grid(args.t)
    print(f"{'t':>10} {'level':>14} {'bound':>14}")
    for t, level, value in rows:
        print(f"{t:>10.4g} {level:>14.6g} {value:>14.6g}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"{args.bound}_curve.json")
        with open(path, "w") as f:
            json.dump({"source": curve.source, "params": curve.params, "calib_id": curve.calib_id,
                       "curve": [list(row) for row in rows]}, f, indent=2)
        logger.info(f"Report written to {os.path.abspath(path)}")
        write_curve_csv(curve, args.t, args.out, f"{args.bound}_curve")
    return 0


def cmd_sample(args, lab_config: Dict[str, Any], calib: CalibrationSet) -> int:
    if args.ball_q is not None:
        batch = sample_ball_q(args.n, args.ball_q, args.m, args.seed)
    else:
        batch = sample(args.law, args.n, args.m, args.seed)
    logger.info(f"Drew {batch.shape[0]}x{batch.shape[1]} matrix ({', '.join(sorted(set(batch.laws)))})")
    if args.out:
        write_sample_csv(batch, args.out)
    else:
        sys.stdout.write(render_sample_csv(batch))
    return 0


def cmd_verify(args, lab_config: Dict[str, Any], calib: CalibrationSet) -> int:
    with open(args.config_path) as f:
        data = json.load(f)
    if args.seed_given or "seed" not in data:
        data["seed"] = args.seed
    if args.trials is not None:
        data["trials"] = args.trials
    config = ExperimentConfig.from_dict(data)
    logger.info(f"Verifying {config.name}: bound={config.bound['id']} trials={config.trials} seed={config.seed}")

    report = verify_bound(
        config, calib=calib, workers=lab_config.get("workers", 4), chunk_size=lab_config.get("chunk_size", 4096),
        progress=lambda chunk, total: headless_progress_bar(chunk, total, "Verifying"),
    )
    print()
    for row in report.rows:
        flag = "pass" if row.passed else "FAIL"
        print(f"  t={row.t:<8.4g} empirical={row.empirical:.5g} [{row.ci_lo:.5g}, {row.ci_hi:.5g}] "
              f"bound={row.bound:.5g} {flag}")
    write_reports(report, args.out, lab_config.get("formats", ["csv", "json", "svg"]))
    return 0 if report.passed else 1


def cmd_orderstats(args, lab_config: Dict[str, Any], calib: CalibrationSet) -> int:
    trials = args.trials or lab_config.get("trials", 10000)
    envelope = uniform_order_envelope(args.n, args.t)
    coverage, se = envelope_coverage(args.n, args.t, trials, args.seed)
    floor = 1.0 - envelope.failure_probability
    ok = coverage >= floor - 3.0 * se
    print(f"Envelope coverage {coverage:.5f} (SE {se:.2g}) vs floor {floor:.5f}: {'pass' if ok else 'FAIL'}")
    if args.law:
        dist = resolve_law(args.law)
        bound = order_sum_bound(dist, args.n, args.k, args.lam)
        held, held_se = order_sum_coverage(dist, args.n, args.k, args.lam, trials, args.seed)
        sum_floor = 1.0 - math.pi ** 2 / 3.0 * math.exp(-0.5 * args.lam ** 2)
        sum_ok = bound.diverged or held >= sum_floor - 3.0 * held_se
        print(f"Order-sum bound {bound.value:.6g} held in {held:.5f} of trials "
              f"(floor {sum_floor:.5f}): {'pass' if sum_ok else 'FAIL'}")
        ok = ok and sum_ok
    return 0 if ok else 1


def cmd_embed(args, lab_config: Dict[str, Any], calib: CalibrationSet) -> int:
    trials = args.trials or 500
    body = body_from_id(args.body, args.n)
    if args.law == "normal":
        report = gaussian_dvoretzky(args.n, args.k, args.eps, body, trials, args.seed, calib, net_eps=args.net_eps)
    else:
        recipe = exponential_recipe(args.n, body.p, body.b, calib)
        logger.info(f"Recipe k_max={recipe.k_max:.4g} T={recipe.T:.4g}")
        spec = EmbeddingSpec(n=args.n, k=args.k, entry_law=args.law, body=body, xi=recipe.xi,
                             T=max(2.0, recipe.T))
        report = verify_embedding(spec, trials, args.net_eps or args.eps / 2.0, args.seed, epsilon=args.eps)
        report.extras["k_max"] = recipe.k_max
    ok = report.success_rate >= report.floor
    print(f"success_rate={report.success_rate:.4f} floor={report.floor:.4f} "
          f"epsilon={report.computed_epsilon:.4g} conditions={'ok' if report.condition_ok else 'not met'}")
    if args.out:
        write_reports(report, args.out, ["json"], stem="embedding")
        write_reports(report, args.out, ["csv"], stem="embedding_ratios")
    return 0 if ok else 1


def cmd_pisier(args, lab_config: Dict[str, Any], calib: CalibrationSet) -> int:
    trials = args.trials or lab_config.get("trials", 10000)
    report = pisier_check(args.f, args.phi, args.n, trials, args.seed)
    print(f"LHS={report.lhs:.6g} (SE {report.lhs_se:.2g})  RHS={report.rhs:.6g} (SE {report.rhs_se:.2g})")
    if args.out:
        write_reports(report, args.out, ["json", "csv"], stem=f"pisier_{args.f}_{args.phi}")
    return 0 if report.holds else 1


def cmd_rotate(args, lab_config: Dict[str, Any], calib: CalibrationSet) -> int:
    trials = args.trials or lab_config.get("trials", 10000)
    report = experiment_random_rotation(args.n, args.q, args.g, trials, args.seed, identity=args.identity)
    for row in report.rows:
        print(f"  lambda={row.lam:<6.3g} prob={row.probability:<8.4g} quantile={row.quantile:.5g} "
              f"guard={'ok' if row.guard_ok else '-'}")
    if args.out:
        write_reports(report, args.out, ["json", "csv"], stem=f"rotation_{args.g}")
    return 0


def cmd_serve(args, lab_config: Dict[str, Any], calib: CalibrationSet) -> int:
    import uvicorn

    logger.info(f"Starting backend on {args.host}:{args.port}...")
    uvicorn.run("api_server:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Root seed (default: lab_config.json)")
    common.add_argument("--trials", type=int, default=None, help="Monte Carlo trials")
    common.add_argument("--out", default=None, help="Output directory for reports")
    common.add_argument("--calibration", default=None, help="JSON file of calibration constants")
    common.add_argument("--config", default=CONFIG_FILE, help=f"Lab configuration file (default: {CONFIG_FILE})")
    common.add_argument("--verbose", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(description="Concentration Lab - numerical checks of concentration bounds")
    commands = parser.add_subparsers(dest="command", required=True)

    bound = commands.add_parser("bound", help="Closed-form bound curves")
    bound_commands = bound.add_subparsers(dest="bound_command", required=True)
    evaluate = bound_commands.add_parser("eval", parents=[common], help="Evaluate a bound on a t grid")
    evaluate.add_argument("--bound", required=True, help="Registered bound id")
    evaluate.add_argument("--params", default="{}", help="Bound parameters as JSON")
    evaluate.add_argument("--t", type=float, nargs="+", required=True, help="Grid points")
    evaluate.set_defaults(handler=cmd_bound_eval)

    sampler = commands.add_parser("sample", parents=[common], help="Draw a seeded sample matrix")
    sampler.add_argument("--law", default="normal", help="Law id (default: normal)")
    sampler.add_argument("--ball-q", type=float, default=None, help="Sample the l_q ball instead (one point per column)")
    sampler.add_argument("--n", type=int, required=True, help="Rows")
    sampler.add_argument("--m", type=int, required=True, help="Columns")
    sampler.set_defaults(handler=cmd_sample)

    verify = commands.add_parser("verify", parents=[common], help="Verify a bound against Monte Carlo")
    verify.add_argument("config_path", help="Experiment config (JSON)")
    verify.set_defaults(handler=cmd_verify)

    orderstats = commands.add_parser("orderstats", parents=[common], help="Order-statistic envelope coverage")
    orderstats.add_argument("--n", type=int, default=200, help="Sample size (default: 200)")
    orderstats.add_argument("--t", type=float, default=2.0, help="Deviation parameter (default: 2)")
    orderstats.add_argument("--law", default=None, help="Nonnegative law for the order-sum bound")
    orderstats.add_argument("--k", type=int, default=1, help="Order-sum index k (default: 1)")
    orderstats.add_argument("--lam", type=float, default=3.0, help="Order-sum lambda (default: 3)")
    orderstats.set_defaults(handler=cmd_orderstats)

    embed = commands.add_parser("embed", parents=[common], help="Random embedding verification")
    embed.add_argument("--n", type=int, default=200, help="Ambient dimension (default: 200)")
    embed.add_argument("--k", type=int, default=3, help="Embedded dimension (default: 3)")
    embed.add_argument("--eps", type=float, default=0.25, help="Distortion tolerance (default: 0.25)")
    embed.add_argument("--net-eps", type=float, default=None, help="Net radius (default: eps/2)")
    embed.add_argument("--body", default="l2", help="Body id: l1, l2, linf or lp:p=<p> (default: l2)")
    embed.add_argument("--law", default="normal", choices=["normal", "laplace"], help="Entry law")
    embed.set_defaults(handler=cmd_embed)

    pisier = commands.add_parser("pisier", parents=[common], help="Gaussian convex-order check")
    pisier.add_argument("--f", default="linear", help="Registered smooth function (default: linear)")
    pisier.add_argument("--phi", default="square", help="Registered convex function (default: square)")
    pisier.add_argument("--n", type=int, default=10, help="Dimension (default: 10)")
    pisier.set_defaults(handler=cmd_pisier)

    rotate = commands.add_parser("rotate", parents=[common], help="Random-rotation experiment")
    rotate.add_argument("--n", type=int, default=500, help="Dimension (default: 500)")
    rotate.add_argument("--q", type=float, default=6.0, help="Tail order, q > 4 (default: 6)")
    rotate.add_argument("--g", default="first_coordinate", help="Registered 1-Lipschitz function")
    rotate.add_argument("--identity", action="store_true", help="Force U = I")
    rotate.set_defaults(handler=cmd_rotate)

    serve = commands.add_parser("serve", parents=[common], help="Start the FastAPI backend")
    serve.add_argument("--host", default=BACKEND_HOST, help=f"Bind address (default: {BACKEND_HOST})")
    serve.add_argument("--port", type=int, default=BACKEND_PORT, help=f"Port (default: {BACKEND_PORT})")
    serve.set_defaults(handler=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main application entry point.

    Returns:
        int: Exit code (0 all pass flags hold, 1 a pass flag failed, 2 error)
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)

    lab_config = ConfigManager(args.config).load_config()
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = lab_config.get("seed", 0)
    if args.out is None and args.command == "verify":
        args.out = lab_config.get("output_dir", "reports")

    try:
        calib = load_calibration(lab_config, args.calibration)
        return args.handler(args, lab_config, calib)
    except LabError as e:
        print(f"[ERROR] {type(e).__name__}: {e}")
        return 2
    except (OSError, json.JSONDecodeError) as e:
        print(f"[ERROR] {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
