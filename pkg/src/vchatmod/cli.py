"""Command-line surface: train, classify, evaluate, calibrate, serve,
recalibrate. All classification behavior is reachable here without the
HTTP service."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .dataset import (load_dataset, load_frame, read_training_table,
                      write_training_table)
from .evidence import CalibrationConfig, SidecarProvider, calibrate_reliability
from .gateway.recalibration import MIN_FEEDBACK_ROWS, recalibrate
from .gateway.store import ModerationStore
from .imaging import FrameSequence
from .pipeline import (ModelBundle, classify_user, default_bundle, evaluate,
                       measure_users, theta_grid, train)
from .skinmodel import SkcModel

log = logging.getLogger(__name__)


def cmd_train(args) -> int:
    result = train(args.data, seed=args.seed, theta=args.theta)
    out = Path(args.out)
    result.bundle.save(out)
    table_path = out.with_suffix(".training.csv")
    write_training_table(list(result.training_rows), table_path)
    gof = result.goodness
    print(f"trained on {len(result.training_rows)} users")
    print(f"alpha={result.bundle.skc.alpha:.4f} beta={result.bundle.skc.beta:.4f} "
          f"beta_se={result.bundle.skc.beta_se:.4f}")
    print(f"calibration: chi_square={gof.chi_square:.3f} df={gof.df} p={gof.p_value:.3f} "
          f"wald={gof.wald:.3f}")
    print(f"wrote {out} and {table_path}")
    return 0


def cmd_classify(args) -> int:
    bundle = ModelBundle.load(args.model)
    frames = tuple(load_frame(p) for p in args.frames)
    seq = FrameSequence(user_id=args.user, frames=frames)
    detections_dir = Path(args.detections) if args.detections else None
    provider = SidecarProvider(detections_dir=detections_dir)
    verdict = classify_user(seq, bundle, provider)
    print(json.dumps(verdict.to_json(), indent=2, sort_keys=True))
    return 0


def cmd_evaluate(args) -> int:
    bundle = ModelBundle.load(args.model)
    users = load_dataset(args.data)
    curve = evaluate(users, bundle, SidecarProvider(), theta_grid(args.theta_steps))
    out = Path(args.out)
    curve.write_csv(out)
    figure_path = out.with_suffix(".png")
    from .render import render_pr_curve
    render_pr_curve(curve, figure_path)
    print(f"wrote {out} and {figure_path}")
    return 0


def cmd_calibrate(args) -> int:
    """Fit standardization statistics and detector reliability from a labeled
    corpus while keeping the (shipped or supplied) coefficients."""
    if args.model:
        base = ModelBundle.load(args.model)
    else:
        base = default_bundle((0.5, 0.5, 0.5), (0.25, 0.25, 0.25))
    users = load_dataset(args.data)
    measurements = measure_users(users, base.motion, base.palettes,
                                 SidecarProvider(), base.darkness_tau)
    mat = np.array([[m.sp.sp1, m.sp.sp2, m.sp.sp3] for m in measurements])
    sp_mean = mat.mean(axis=0)
    sp_stdev = mat.std(axis=0, ddof=1)
    if np.any(sp_stdev <= 0):
        print("calibration corpus has a constant skin-proportion column", file=sys.stderr)
        return 1
    observations = [(outcomes, not m.is_misbehaving)
                    for m in measurements for outcomes in m.frame_outcomes]
    reliability = calibrate_reliability(observations, CalibrationConfig(seed=args.seed))
    model = SkcModel(sp_mean=tuple(float(v) for v in sp_mean),
                     sp_stdev=tuple(float(v) for v in sp_stdev),
                     loadings=base.skc.loadings,
                     alpha=base.skc.alpha, beta=base.skc.beta,
                     beta_se=base.skc.beta_se)
    bundle = replace(base, skc=model, reliability=reliability)
    bundle.save(args.out)
    print(f"calibrated on {len(measurements)} users; wrote {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .gateway.service import create_app

    bundle = ModelBundle.load(args.model) if args.model else None
    store = ModerationStore(args.store)
    console_dir = Path(args.console) if args.console else None
    table = Path(args.training_table) if args.training_table else None
    app = create_app(store, bundle, console_dir=console_dir,
                     moderator_token=args.token, training_table=table,
                     calibration=CalibrationConfig(seed=args.seed))
    host, _, port = args.addr.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def cmd_recalibrate(args) -> int:
    store = ModerationStore(args.store)
    base = ModelBundle.load(args.model) if args.model else store.active_bundle()
    if base is None:
        print("no base bundle: pass --model or activate one in the store",
              file=sys.stderr)
        return 1
    rows = read_training_table(args.training_table) if args.training_table else []
    try:
        bundle = recalibrate(store.feedback_rows(), base, rows,
                             CalibrationConfig(seed=args.seed),
                             min_rows=args.min_rows)
    except Exception as exc:
        print(f"recalibration failed: {exc}", file=sys.stderr)
        return 1
    bundle.save(args.out)
    version = store.save_bundle_version(bundle)
    print(f"wrote {args.out} (store version {version}, not yet active)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vchatmod",
                                     description="moderation engine for video-chat screenshots")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model bundle from a labeled dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theta", type=float, default=0.5)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="classify one user's three screenshots")
    p.add_argument("--model", required=True)
    p.add_argument("--frames", nargs=3, required=True, metavar=("A", "B", "C"))
    p.add_argument("--detections", default=None,
                   help="directory of .det.json sidecars (default: next to frames)")
    p.add_argument("--user", default="cli-user")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="PR sweep over a labeled dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="CSV path; a .png figure lands beside it")
    p.add_argument("--theta-steps", type=int, default=101)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("calibrate", help="fit SP statistics and reliability from a corpus")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", default=None, help="base bundle (default: shipped defaults)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("serve", help="run the HTTP gateway")
    p.add_argument("--model", default=None)
    p.add_argument("--addr", default="127.0.0.1:8080")
    p.add_argument("--store", required=True)
    p.add_argument("--console", default=None, help="static console assets to mount at /console")
    p.add_argument("--token", default=None, help="static moderator token")
    p.add_argument("--training-table", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("recalibrate", help="fold moderator feedback into a new bundle version")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--training-table", default=None)
    p.add_argument("--min-rows", type=int, default=MIN_FEEDBACK_ROWS)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_recalibrate)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
