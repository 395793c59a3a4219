"""Command-line entry point: ``python -m fairpfn <subcommand> ...``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 acceptance check
failed (only with ``--assert``).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import uuid
from pathlib import Path

from .. import __version__
from .. import casebench as cb
from ..metrics import append_rows
from ..model import ModelConfig, TrainConfig, load, prior_fit, save
from ..prior import PriorRanges, export_pair, sample_pair
from ..realworld import IngestError
from . import report as rp
from .evaluate import METHODS, evaluate_instance

log = logging.getLogger("fairpfn")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ASSERT = 0, 2, 3, 4
CONFIG_SCHEMA = 1

# Desk-scale defaults for `train`; the full-size model lives in ModelConfig.
DESK_STEPS = 6000
DESK_DATASETS_PER_STEP = 8
DESK_LR = 1e-3
DESK_D_MODEL = 64
DESK_LAYERS = 3
DESK_HEADS = 4


class DataError(Exception):
    """Input files are missing, malformed or inconsistent."""


class UsageError(Exception):
    """Flag values that parse but make no sense together."""


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--out", help="output file or directory")
    p.add_argument("--config", help="JSON file of flag defaults; explicit flags win")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.add_argument("--assert", dest="assert_", action="store_true",
                   help="exit 4 when acceptance checks fail")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="fairpfn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", parents=[common], help="prior-fit a checkpoint")
    t.add_argument("--steps", type=int, default=DESK_STEPS)
    t.add_argument("--datasets-per-step", type=int, default=DESK_DATASETS_PER_STEP)
    t.add_argument("--lr", type=float, default=DESK_LR)
    t.add_argument("--d-model", type=int, default=DESK_D_MODEL)
    t.add_argument("--layers", type=int, default=DESK_LAYERS)
    t.add_argument("--heads", type=int, default=DESK_HEADS)
    t.add_argument("--d-ff", type=int, default=None, help="feed-forward width (default 2 x d-model)")
    t.add_argument("--target-mode", choices=("fair", "biased"), default="fair")
    t.add_argument("--log-every", type=int, default=50)

    b = sub.add_parser("bench", parents=[common], help="generate the case-study suite")
    b.add_argument("--count", type=int, default=100, help="instances per case (default 100)")
    b.add_argument("--cases", default=",".join(cb.CASES))

    e = sub.add_parser("eval", parents=[common], help="evaluate methods on a benchmark directory")
    e.add_argument("--bench", required=True)
    e.add_argument("--checkpoint", help="FairPFN checkpoint (needed for method fairpfn)")
    e.add_argument("--unfair-checkpoint", help="biased-target checkpoint for --base-learner pfn")
    e.add_argument("--methods", default=",".join(METHODS))
    e.add_argument("--base-learner", choices=("logistic", "pfn"), default="logistic")
    e.add_argument("--run-id", default=None)
    e.add_argument("--limit", type=int, default=None, help="evaluate only the first N instances")

    r = sub.add_parser("report", parents=[common], help="aggregate a results CSV")
    r.add_argument("--results", required=True)
    r.add_argument("--bench", help="benchmark directory, used to attach noise scales to plot data")

    pr = sub.add_parser("prior", help="synthetic prior utilities")
    prs = pr.add_subparsers(dest="prior_command", required=True)
    ps = prs.add_parser("sample", parents=[common], help="export biased/fair dataset pairs")
    ps.add_argument("--count", type=int, default=1)
    ps.add_argument("--n", type=int, default=None, help="rows per dataset (default: sampled)")

    rw = sub.add_parser("realworld", help="real-world causal models")
    rws = rw.add_subparsers(dest="realworld_command", required=True)
    rf = rws.add_parser("fit", parents=[common], help="fit an additive-noise model and emit twins")
    rf.add_argument("--dataset", choices=("law", "adult"), required=True)
    rf.add_argument("--csv", required=True)
    rf.add_argument("--graph", help="graph config (default: shipped config for --dataset)")
    rf.add_argument("--trees", type=int, default=50)
    rf.add_argument("--depth", type=int, default=4)
    return parser


def _leaf_parser(parser, args):
    """The subparser that handled ``args`` (needed to apply config defaults)."""
    node = parser
    for dest in ("command", "prior_command", "realworld_command"):
        name = getattr(args, dest, None)
        if name is None:
            continue
        action = next(a for a in node._actions if isinstance(a, argparse._SubParsersAction))
        node = action.choices[name]
    return node


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            overrides = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"--config: {exc}")
        leaf = _leaf_parser(parser, args)
        known = {a.dest for a in leaf._actions}
        unknown = sorted(set(overrides) - known)
        if unknown:
            parser.error(f"--config: unknown keys {unknown}")
        leaf.set_defaults(**{k.replace("-", "_"): v for k, v in overrides.items()})
        args = parser.parse_args(argv)
    return args


def resolved_config(args):
    d = {k: v for k, v in vars(args).items() if k not in ("assert_", "verbose")}
    return {"schema_version": CONFIG_SCHEMA, "tool_version": __version__, "args": d}


def write_config(args, directory, name="run_config.json"):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / name).write_text(json.dumps(resolved_config(args), indent=1, sort_keys=True))


def _require_out(args, default):
    return Path(args.out or default)


# -- subcommands ----------------------------------------------------------

def train_config(args):
    """The TrainConfig that ``train`` runs for parsed ``args``."""
    model = ModelConfig(n_layers=args.layers, n_heads=args.heads, d_model=args.d_model,
                        d_ff=args.d_ff or 2 * args.d_model, target_mode=args.target_mode)
    return TrainConfig(steps=args.steps, datasets_per_step=args.datasets_per_step, base_lr=args.lr,
                       seed=args.seed, prior=PriorRanges(), model=model)


def cmd_train(args):
    out = _require_out(args, "fairpfn.fpfn")
    if out.exists() and not args.force:
        raise DataError(f"{out} exists; pass --force to overwrite")
    cfg = train_config(args)
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    t0 = time.time()

    def progress(step, loss, lr):
        if args.log_every and step % args.log_every == 0:
            log.info("step %d loss %.4f lr %.2e (%.0fs)", step, loss, lr, time.time() - t0)

    ckpt = prior_fit(cfg, progress)
    out.parent.mkdir(parents=True, exist_ok=True)
    save(ckpt, out)
    write_config(args, out.parent, out.name + ".config.json")
    with open(out.with_name(out.name + ".loss.csv"), "w") as f:
        f.write("step,loss\n")
        f.writelines(f"{i},{v}\n" for i, v in enumerate(ckpt.metadata["loss_curve"]))
    print(f"wrote {out} ({ckpt.weight_hash()[:12]}, method {ckpt.metadata['method_id']})")
    return EXIT_OK


def cmd_bench(args):
    out = _require_out(args, "bench")
    cases = [c.strip() for c in args.cases.split(",") if c.strip()]
    bad = [c for c in cases if c not in cb.CASES]
    if bad:
        raise UsageError(f"unknown cases {bad}; choose from {list(cb.CASES)}")
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    try:
        man = cb.generate_suite(out, args.count, seed=args.seed, cases=cases, overwrite=args.force)
    except FileExistsError as exc:
        raise DataError(str(exc)) from None
    write_config(args, out)
    print(f"wrote {len(man['instances'])} instances to {out} (manifest {man['manifest_hash'][:12]})")
    return EXIT_OK


def cmd_eval(args):
    out = _require_out(args, "results.csv")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise UsageError(f"unknown methods {bad}; choose from {list(METHODS)}")
    checkpoints = {}
    try:
        if "fairpfn" in methods:
            if not args.checkpoint:
                raise UsageError("method fairpfn needs --checkpoint")
            checkpoints["fairpfn"] = load(args.checkpoint)
        if args.base_learner == "pfn":
            if not args.unfair_checkpoint:
                raise UsageError("--base-learner pfn needs --unfair-checkpoint")
            checkpoints["pfn-unfair"] = load(args.unfair_checkpoint)
        manifest = cb.load_manifest(args.bench)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from None
    if out.exists() and args.force:
        out.unlink()
    run_id = args.run_id or uuid.uuid4().hex[:12]
    entries = manifest["instances"][: args.limit] if args.limit else manifest["instances"]
    skipped = 0
    for entry in entries:
        try:
            inst = cb.load_instance(args.bench, entry)
        except (OSError, ValueError) as exc:
            skipped += 1
            log.warning("skipping %s: %s", entry["id"], exc)
            continue
        append_rows(out, evaluate_instance(inst, methods, checkpoints, seed=args.seed,
                                           run_id=run_id, base_learner=args.base_learner))
    write_config(args, out.parent, out.name + ".config.json")
    print(f"evaluated {len(entries) - skipped} instances, skipped {skipped}; rows in {out}")
    if entries and skipped > 0.05 * len(entries):
        log.error("%d of %d instances skipped (> 5%%)", skipped, len(entries))
        return EXIT_DATA
    return EXIT_OK


def cmd_report(args):
    out = _require_out(args, "report")
    sigmas = None
    if args.bench:
        try:
            sigmas = {e["id"]: e.get("sigma") for e in cb.load_manifest(args.bench)["instances"]}
        except OSError as exc:
            raise DataError(str(exc)) from None
    try:
        agg, pareto = rp.build_report(args.results, out, sigmas)
    except rp.MalformedResults as exc:
        for p in exc.problems:
            log.error("%s", p)
        raise DataError(str(exc)) from None
    except OSError as exc:
        raise DataError(str(exc)) from None
    write_config(args, out)
    if not rp.verify(args.results, out):
        raise DataError("verify pass: aggregates differ from a recomputation")
    for case, p in pareto.items():
        print(f"{case}: Pareto front {', '.join(p['front'])}")
    cases = sorted({c for c, _, _ in agg if c in cb.CASES})
    checks = rp.acceptance_checks(agg, cases)
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name} ({detail})")
    (out / "checks.json").write_text(json.dumps(
        [{"check": n, "passed": bool(ok), "detail": d} for n, ok, d in checks], indent=1))
    if args.assert_ and not all(ok for _, ok, _ in checks):
        return EXIT_ASSERT
    return EXIT_OK


def cmd_prior_sample(args):
    out = _require_out(args, "prior_samples")
    if out.exists() and any(out.iterdir()) and not args.force:
        raise DataError(f"{out} is not empty; pass --force")
    for i in range(args.count):
        pair = sample_pair(args.seed + i, PriorRanges(), n=args.n)
        export_pair(pair, out, f"pair_{i:03d}")
    write_config(args, out)
    print(f"wrote {args.count} dataset pairs to {out}")
    return EXIT_OK


def cmd_realworld_fit(args):
    from ..realworld.export import export_realworld
    out = _require_out(args, f"realworld_{args.dataset}")
    if (out / "manifest.json").exists() and not args.force:
        raise DataError(f"{out} already holds a fit; pass --force")
    try:
        summary = export_realworld(args.dataset, args.csv, out, graph_path=args.graph,
                                   n_trees=args.trees, max_depth=args.depth, seed=args.seed)
    except (OSError, IngestError, ValueError) as exc:
        raise DataError(str(exc)) from None
    write_config(args, out)
    print(json.dumps(summary, indent=1, sort_keys=True))
    return EXIT_OK


HANDLERS = {"train": cmd_train, "bench": cmd_bench, "eval": cmd_eval, "report": cmd_report,
            ("prior", "sample"): cmd_prior_sample, ("realworld", "fit"): cmd_realworld_fit}


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    key = args.command
    if key == "prior":
        key = ("prior", args.prior_command)
    elif key == "realworld":
        key = ("realworld", args.realworld_command)
    try:
        return HANDLERS[key](args)
    except UsageError as exc:
        print(f"fairpfn {args.command}: error: {exc}", file=sys.stderr)
        build_parser().print_usage(sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"fairpfn {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
