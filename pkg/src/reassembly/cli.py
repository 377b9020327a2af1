"""Command-line driver: fragment, score, solve, evaluate, count.

Everything composes through files (manifests, score files, report JSONs);
no state hides between invocations, and every output embeds the RunConfig
that produced it.  Exit codes: 0 success, 1 usage error, 2 data/schema
error, 3 size budget exceeded.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import fragmenter, metrics, scoring, solver
from .core import (
    ALL_CENTRALS,
    KNOWN_CENTRAL,
    BudgetExceededError,
    CostModel,
    DataError,
    PuzzleError,
    PuzzleInstance,
    PuzzleSpec,
    PuzzleTruth,
    Reassembly,
    ScoreTensor,
)
from .graph import DEFAULT_NODE_BUDGET, count_graph

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".tif", ".tiff", ".webp"}

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BUDGET = 3


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one CLI run."""

    subcommand: str
    input: str | None = None
    output: str | None = None
    spec: str = "central-known"
    allow_empty: bool = False
    extra_fragments: int = 0
    drop_fragments: int = 0
    scorer: str | None = None
    noise: float = 0.0
    score_file: str | None = None
    solver: str = solver.DIJKSTRA
    cost: str = "one-minus-p"
    skip_cost: str = "outsider"
    skip_lambda: float = 0.5
    beam: int | None = None
    seed: int = 0
    jitter: bool = False
    render: bool = False

    def to_json_dict(self) -> dict:
        return dataclasses.asdict(self)


class _Parser(argparse.ArgumentParser):
    """argparse, but usage problems exit with code 1 (2 is for bad data)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _cost_model(args) -> CostModel:
    return CostModel(
        mode="one_minus_p" if args.cost == "one-minus-p" else "neg_log_p",
        skip_cost_source="outsider" if args.skip_cost == "outsider" else "lambda",
        skip_lambda=args.skip_lambda,
    )


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def _write_json(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


# ---------------------------------------------------------------- fragment

def _fragment_one(job):
    path_str, out_dir, seed, jitter = job
    fset = fragmenter.fragment_file(path_str, jitter_enabled=jitter, rng_seed=seed)
    fragmenter.write_fragment_set(fset, out_dir)
    return fset.source_id


def cmd_fragment(args) -> int:
    images = Path(args.images)
    if not images.is_dir():
        raise DataError(f"{images} is not a directory")
    files = sorted(p for p in images.iterdir()
                   if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        _warn(f"no images found under {images}")
    out_root = Path(args.out)
    jobs = [(str(p), str(out_root / p.stem), args.seed + i, args.jitter)
            for i, p in enumerate(files)]
    done = 0
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = {pool.submit(_fragment_one, j): j[0] for j in jobs}
            for fut in concurrent.futures.as_completed(futures):
                try:
                    fut.result()
                    done += 1
                except DataError as e:
                    _warn(f"skipping {futures[fut]}: {e}")
    else:
        for j in jobs:
            try:
                _fragment_one(j)
                done += 1
            except DataError as e:
                _warn(f"skipping {j[0]}: {e}")
    print(f"fragmented {done}/{len(files)} image(s) into {out_root}")
    return EXIT_OK


# ------------------------------------------------------------ puzzle setup

def _manifest_dirs(root: Path) -> list[Path]:
    """Fragment-set directories under root (directories with a manifest)."""
    if (root / fragmenter.MANIFEST_NAME).is_file():
        return [root]
    return sorted(d for d in root.iterdir()
                  if d.is_dir() and (d / fragmenter.MANIFEST_NAME).is_file())


def _build_instance(manifest_dir: Path, args) -> PuzzleInstance:
    target = fragmenter.load_fragment_set(manifest_dir)
    pool = []
    if args.extra_fragments > 0:
        pool_root = Path(args.pool) if args.pool else manifest_dir.parent
        pool = [fragmenter.load_fragment_set(d) for d in _manifest_dirs(pool_root)
                if d != manifest_dir]
        if not pool:
            raise DataError(f"--extra-fragments needs donor manifests under "
                            f"{pool_root} (see --pool)")
    return fragmenter.make_puzzle(
        target, pool=pool,
        central_known=args.spec == "central-known",
        allow_empty=args.allow_empty,
        n_drop=args.drop_fragments,
        n_outsiders=args.extra_fragments,
        rng_seed=args.seed)


def _score_instance(instance: PuzzleInstance, args) -> ScoreTensor:
    config = scoring.ScorerConfig(kind=args.scorer, noise_level=args.noise,
                                  seed=args.seed)
    return scoring.score(instance, config)


# ----------------------------------------------------------------- score

def cmd_score(args) -> int:
    instance = _build_instance(_single_manifest(args.manifest), args)
    tensor = _score_instance(instance, args)
    scoring.save_score_tensor(tensor, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _single_manifest(path_str: str) -> Path:
    path = Path(path_str)
    if path.name == fragmenter.MANIFEST_NAME:
        return path.parent
    if (path / fragmenter.MANIFEST_NAME).is_file():
        return path
    raise DataError(f"no manifest at {path}")


# ----------------------------------------------------------------- solve

def _spec_from_tensor(tensor: ScoreTensor, allow_empty: bool) -> PuzzleSpec:
    central_known = tensor.variant == KNOWN_CENTRAL
    placeable = tensor.num_fragments - (0 if central_known else 1)
    return PuzzleSpec(
        fragment_ids=tensor.fragment_ids,
        num_positions=tensor.num_positions,
        central_known=central_known,
        allow_empty_positions=allow_empty or placeable != tensor.num_positions,
    )


def _solve_one(tensor: ScoreTensor, spec: PuzzleSpec, args,
               puzzle_id: str, instance: PuzzleInstance | None,
               config: RunConfig) -> dict:
    model = _cost_model(args)
    report = solver.solve(tensor, spec, model, method=args.solver,
                          beam_width=args.beam)
    doc = report.to_json_dict()
    doc["puzzle_id"] = puzzle_id
    doc["instance"] = {
        "fragment_ids": list(spec.fragment_ids),
        "num_positions": spec.num_positions,
        "central_known": spec.central_known,
        "central_id": instance.known_central_id if instance else None,
    }
    doc["run_config"] = config.to_json_dict()
    return doc


def _render_path(args, puzzle_id: str, batch_dir: Path | None) -> Path:
    if batch_dir is not None:
        return batch_dir / f"{puzzle_id}.render.png"
    if args.out:
        return Path(args.out).with_suffix(".png")
    return Path(f"{puzzle_id}.render.png")


def _maybe_render(doc: dict, instance: PuzzleInstance, args,
                  batch_dir: Path | None) -> None:
    if not args.render:
        return
    reassembly = Reassembly.from_json_dict(doc["reassembly"])
    canvas = fragmenter.render_reassembly(
        reassembly, instance.rasters,
        central_id=instance.known_central_id,
        truth=instance.truth)
    path = _render_path(args, doc["puzzle_id"], batch_dir)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(canvas).save(path, format="PNG")


def cmd_solve(args) -> int:
    config = _run_config("solve", args)
    if args.scores:
        if args.render:
            _warn("--render needs fragment rasters; ignored for --scores input")
        tensor = scoring.load_score_tensor(args.scores)
        spec = _spec_from_tensor(tensor, args.allow_empty)
        puzzle_id = Path(args.scores).name.split(".")[0]
        doc = _solve_one(tensor, spec, args, puzzle_id, None, config)
        _write_json(doc, args.out)
        return EXIT_OK

    root = Path(args.manifest)
    dirs = _manifest_dirs(root) if root.is_dir() else [_single_manifest(args.manifest)]
    if not dirs:
        raise DataError(f"no manifests under {root}")
    batch = len(dirs) > 1
    if batch and not args.out:
        raise DataError("batch solving needs --out DIR for the reports")
    out_dir = Path(args.out) if batch else None
    for d in dirs:
        instance = _build_instance(d, args)
        tensor = _score_instance(instance, args)
        doc = _solve_one(tensor, instance.spec, args,
                         instance.truth.source_id, instance, config)
        if batch:
            out_dir.mkdir(parents=True, exist_ok=True)
            _write_json(doc, str(out_dir / f"{doc['puzzle_id']}.report.json"))
        else:
            _write_json(doc, args.out)
        _maybe_render(doc, instance, args, out_dir)
    if batch:
        print(f"solved {len(dirs)} puzzle(s) into {out_dir}")
    return EXIT_OK


# --------------------------------------------------------------- evaluate

def _truth_for_report(doc: dict, manifests_root: Path) -> PuzzleTruth:
    source_id = doc["puzzle_id"]
    mdir = manifests_root / source_id
    fset = fragmenter.load_fragment_set(mdir)
    manifest_truth = fset.truth()
    in_instance = set(doc["instance"]["fragment_ids"])
    return PuzzleTruth(
        source_id=source_id,
        central_id=manifest_truth.central_id,
        positions={fid: pos for fid, pos in manifest_truth.positions.items()
                   if fid in in_instance},
        outsiders=frozenset(in_instance - set(manifest_truth.positions)
                            - {manifest_truth.central_id}),
    )


def cmd_evaluate(args) -> int:
    reports_dir = Path(args.reports)
    report_files = sorted(reports_dir.glob("*.report.json"))
    if not report_files:
        raise DataError(f"no *.report.json under {reports_dir}")
    reassemblies, truths = [], []
    for path in report_files:
        try:
            doc = json.loads(path.read_text())
            reassemblies.append(Reassembly.from_json_dict(doc["reassembly"]))
            truths.append(_truth_for_report(doc, Path(args.manifests)))
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"{path}: bad report ({e})") from None
    result = metrics.evaluate(reassemblies, truths)
    doc = result.to_json_dict()
    doc["run_config"] = _run_config("evaluate", args).to_json_dict()
    _write_json(doc, args.out)
    return EXIT_OK


# ------------------------------------------------------------------ count

def cmd_count(args) -> int:
    nodes, edges = count_graph(args.variant, args.n, args.p)
    _write_json({"variant": args.variant, "n": args.n, "p": args.p,
                 "nodes": nodes, "edges": edges}, args.out)
    return EXIT_OK


# ------------------------------------------------------------------ main

def _run_config(sub: str, args) -> RunConfig:
    return RunConfig(
        subcommand=sub,
        input=getattr(args, "manifest", None) or getattr(args, "images", None)
              or getattr(args, "reports", None),
        output=args.out,
        spec=getattr(args, "spec", "central-known"),
        allow_empty=getattr(args, "allow_empty", False),
        extra_fragments=getattr(args, "extra_fragments", 0),
        drop_fragments=getattr(args, "drop_fragments", 0),
        scorer=getattr(args, "scorer", None),
        noise=getattr(args, "noise", 0.0),
        score_file=getattr(args, "scores", None),
        solver=getattr(args, "solver", solver.DIJKSTRA),
        cost=getattr(args, "cost", "one-minus-p"),
        skip_cost=getattr(args, "skip_cost", "outsider"),
        skip_lambda=getattr(args, "skip_lambda", 0.5),
        beam=getattr(args, "beam", None),
        seed=getattr(args, "seed", 0),
        jitter=getattr(args, "jitter", False),
        render=getattr(args, "render", False),
    )


def _add_puzzle_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--spec", choices=["central-known", "central-unknown"],
                   default="central-known", help="is the central fragment given?")
    p.add_argument("--allow-empty", action="store_true",
                   help="allow positions to stay empty")
    p.add_argument("--extra-fragments", type=int, default=0, metavar="K",
                   help="inject K fragments from other images")
    p.add_argument("--drop-fragments", type=int, default=0, metavar="M",
                   help="remove M in-image fragments before solving")
    p.add_argument("--pool", default=None,
                   help="directory of donor manifests for --extra-fragments "
                        "(default: siblings of the target)")
    p.add_argument("--scorer", choices=["oracle", "noisy_oracle", "content"],
                   default="oracle")
    p.add_argument("--noise", type=float, default=0.0,
                   help="noise level for the noisy oracle")
    p.add_argument("--seed", type=int, default=0)


def _add_cost_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cost", choices=["one-minus-p", "neg-log"],
                   default="one-minus-p")
    p.add_argument("--skip-cost", choices=["outsider", "lambda"],
                   default="outsider",
                   help="price skip edges from outsider scores (with lambda "
                        "fallback) or always lambda")
    p.add_argument("--lambda", dest="skip_lambda", type=float, default=0.5,
                   metavar="F", help="fixed skip cost")


def build_parser() -> _Parser:
    parser = _Parser(prog="reassembly",
                     description="Fragment images, score pairs, and solve "
                                 "reassembly puzzles via shortest paths.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("fragment", help="cut a directory of images into "
                                        "fragment sets")
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jitter", action=argparse.BooleanOptionalAction,
                   default=False, help="apply +-7px jitter (training data)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_fragment)

    p = sub.add_parser("score", help="write a score file for one puzzle")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    _add_puzzle_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("solve", help="solve puzzles from manifests or a "
                                     "score file")
    p.add_argument("--manifest", help="fragment-set dir, manifest file, or a "
                                      "directory of fragment sets (batch)")
    p.add_argument("--scores", help="solve directly from a *.scores.json file")
    p.add_argument("--out", default=None,
                   help="report file (single) or directory (batch)")
    p.add_argument("--solver", choices=list(solver.METHODS),
                   default=solver.DIJKSTRA)
    p.add_argument("--beam", type=int, default=None, metavar="W",
                   help="beam width for --solver implicit")
    p.add_argument("--render", action="store_true",
                   help="write a composite PNG next to each report")
    _add_puzzle_flags(p)
    _add_cost_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="grade solve reports against "
                                        "manifests")
    p.add_argument("--reports", required=True)
    p.add_argument("--manifests", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("count", help="node/edge counts of the assignment "
                                     "graphs")
    p.add_argument("variant", choices=["known_central", "unknown_central",
                                       "empty_positions"])
    p.add_argument("n", type=int)
    p.add_argument("p", type=int)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_count)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand == "solve" and bool(args.manifest) == bool(args.scores):
        parser.error("solve needs exactly one of --manifest or --scores")
    try:
        return args.func(args)
    except BudgetExceededError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except PuzzleError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
