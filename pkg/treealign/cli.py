"""The ``treealign`` command line.

Commands:
    sample-tree       sample a tree metric for point files
    dist              one discrepancy between two point files
    knn               repeated random-split kNN over a dataset
    kmeans            cluster a dataset with tree-sliced FlowAlign
    bench             time discrepancy evaluations on random dataset pairs
    emit-figure-data  CSV series for external plotting

Exit codes: 0 on success, 2 on input errors, 1 on anything else.
"""

import argparse
import csv
import io
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Optional

from . import __version__
from .barycenter import f_beta
from .datasets import Dataset, load_dataset, read_point_file
from .errors import DegenerateMeasureError, InputError
from .experiments import (
    ExperimentConfig,
    Family,
    Task,
    bench,
    kmeans_scaling,
    knn_experiment,
    sampling_time,
    slices_tradeoff,
)
from .flow_align import Strategy
from .kmeans import kmeans
from .log import ImmediateStreamHandler, configure_logging
from .sampling import RootMode, SamplerConfig, sample_aligned_root_trees
from .sliced import BaseDiscrepancy, SliceSpec, discrepancy
from .univariate import LossKind

logger = logging.getLogger(__name__)

# dist methods -> (base discrepancy, sliced?)
METHODS = {
    "flowalign": (BaseDiscrepancy.FLOW, False),
    "depthalign": (BaseDiscrepancy.DEPTH, False),
    "tsfa": (BaseDiscrepancy.FLOW, True),
    "tsda": (BaseDiscrepancy.DEPTH, True),
    "sgw": (BaseDiscrepancy.SGW, True),
}
SLICED_METHODS = ["tsfa", "tsda", "sgw"]


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="root random seed (default: 0)")
    common.add_argument("--threads", type=int, default=1, help="worker threads (default: 1)")
    common.add_argument("--out", type=Path, help="output file (default: stdout)")
    common.add_argument(
        "--omit-timing",
        action="store_true",
        help="leave wall-clock columns out of CSV output",
    )
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    return common


def _sampler_parser() -> argparse.ArgumentParser:
    sampler = argparse.ArgumentParser(add_help=False)
    sampler.add_argument("--kappa", type=int, default=4, help="clusters per split (default: 4)")
    sampler.add_argument("--depth", type=int, default=6, help="maximum tree depth (default: 6)")
    sampler.add_argument(
        "--root",
        default="mean",
        help="root placement: 'mean' or 'fixed:<c1>,<c2>,...' (default: mean)",
    )
    return sampler


def _slice_parser() -> argparse.ArgumentParser:
    sliced = argparse.ArgumentParser(add_help=False)
    sliced.add_argument("--slices", type=int, default=10, help="tree slices (default: 10)")
    sliced.add_argument(
        "--search-roots",
        action="store_true",
        help="minimize over root pairs instead of aligning the sampled roots",
    )
    sliced.add_argument(
        "--joint",
        action="store_true",
        help="sample one tree per slice on the union of both supports",
    )
    sliced.add_argument(
        "--level-loss",
        choices=[m.value for m in LossKind],
        default=LossKind.SQUARED.value,
        help="DepthAlign per-level loss (default: squared, square-rooted)",
    )
    sliced.add_argument(
        "--strategy",
        choices=[m.value for m in Strategy],
        default=Strategy.INCREMENTAL.value,
        help="FlowAlign root search (default: incremental)",
    )
    return sliced


def build_parser() -> argparse.ArgumentParser:
    """Parser for every ``treealign`` command."""
    common = _common_parser()
    sampler = _sampler_parser()
    sliced = _slice_parser()

    parser = argparse.ArgumentParser(
        prog="treealign",
        description="FlowAlign and DepthAlign discrepancies between measures on tree metrics",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "sample-tree", parents=[common, sampler], help="sample tree metrics for point files"
    )
    p.add_argument("points", nargs="+", type=Path, help="point files")
    p.add_argument(
        "--weighted",
        action="store_true",
        default=None,
        help="first column holds weights (default: detected from a '# weighted' header)",
    )

    p = sub.add_parser(
        "dist", parents=[common, sampler, sliced], help="discrepancy between two point files"
    )
    p.add_argument("method", choices=list(METHODS))
    p.add_argument("--a", required=True, type=Path, help="first point file")
    p.add_argument("--b", required=True, type=Path, help="second point file")
    p.add_argument(
        "--weighted",
        action="store_true",
        default=None,
        help="first column holds weights (default: detected from a '# weighted' header)",
    )
    p.add_argument(
        "--aligned-root",
        action="store_true",
        help="flowalign/depthalign: use the sampled roots instead of searching root pairs",
    )

    p = sub.add_parser("knn", parents=[common, sampler, sliced], help="kNN experiment")
    p.add_argument("--data", required=True, type=Path, help="manifest or dataset directory")
    p.add_argument("--method", choices=SLICED_METHODS, default="tsfa")
    p.add_argument("--task", choices=[t.value for t in Task], default=Task.CLASSIFY.value)
    p.add_argument("--k", type=int, nargs="+", default=[1, 3, 5], help="neighbor counts")
    p.add_argument("--split", type=float, default=0.8, help="train fraction (default: 0.8)")
    p.add_argument("--repeats", type=int, default=20, help="random splits (default: 20)")

    p = sub.add_parser("kmeans", parents=[common, sampler], help="k-means over a dataset")
    p.add_argument("--data", required=True, type=Path, help="manifest or dataset directory")
    p.add_argument("--clusters", type=int, required=True, help="number of clusters")
    p.add_argument("--slices", type=int, default=10, help="tree slices (default: 10)")
    p.add_argument("--supports", type=int, default=100, help="barycenter supports (default: 100)")
    p.add_argument("--max-iter", type=int, default=20, help="Lloyd iterations (default: 20)")

    p = sub.add_parser("bench", parents=[common, sampler, sliced], help="timing benchmark")
    p.add_argument("--data", required=True, type=Path, help="manifest or dataset directory")
    p.add_argument("--method", choices=SLICED_METHODS, default="tsfa")
    p.add_argument("--pairs", type=int, default=20, help="random pairs to time (default: 20)")

    p = sub.add_parser(
        "emit-figure-data", parents=[common, sampler, sliced], help="CSV series for plots"
    )
    p.add_argument("figure", choices=["slices", "sampling", "kmeans-scaling"])
    p.add_argument("--data", type=Path, help="dataset for 'slices'")
    p.add_argument("--points", type=Path, help="point file for 'sampling'")
    p.add_argument("--method", choices=SLICED_METHODS, default="tsfa")
    p.add_argument("--task", choices=[t.value for t in Task], default=Task.CLASSIFY.value)
    p.add_argument("--repeats", type=int, default=5, help="random splits per point (default: 5)")
    p.add_argument("--slice-counts", type=int, nargs="+", default=[1, 2, 5, 10, 20])
    p.add_argument("--depths", type=int, nargs="+", default=[2, 4, 6, 8])
    p.add_argument("--kappas", type=int, nargs="+", default=[2, 4, 8])
    p.add_argument("--sizes", type=int, nargs="+", default=[20, 50, 100, 200])
    p.add_argument(
        "--family",
        choices=[f.value for f in Family],
        default=Family.TWO.value,
        help="synthetic dataset for 'kmeans-scaling' (default: two)",
    )
    p.add_argument("--supports", type=int, default=100, help="barycenter supports (default: 100)")
    return parser


def parse_root(text: str) -> tuple[RootMode, Optional[tuple[float, ...]]]:
    """Parse ``mean`` or ``fixed:<c1>,<c2>,...``.

    Raises:
        InputError: If the text is neither form
    """
    if text == RootMode.MEAN.value:
        return RootMode.MEAN, None
    mode, _, coords = text.partition(":")
    if mode != RootMode.FIXED.value or not coords:
        raise InputError(f"--root must be 'mean' or 'fixed:<coords>', got {text!r}")
    try:
        return RootMode.FIXED, tuple(float(c) for c in coords.split(","))
    except ValueError as e:
        raise InputError(f"Bad --root coordinates {coords!r}: {e}") from e


def sampler_config(args: argparse.Namespace) -> SamplerConfig:
    mode, point = parse_root(args.root)
    return SamplerConfig(
        num_clusters=args.kappa,
        max_depth=args.depth,
        seed=args.seed,
        root_mode=mode,
        root_point=point,
    )


def slice_spec(args: argparse.Namespace, method: str) -> SliceSpec:
    """SliceSpec for a ``dist``/``knn``/``bench`` method name.

    flowalign and depthalign are one-slice specs that search root pairs
    unless ``--aligned-root`` is given; the sliced methods align roots
    unless ``--search-roots`` is given.
    """
    base, is_sliced = METHODS[method]
    if is_sliced:
        n_slices, aligned = args.slices, not args.search_roots
    else:
        n_slices, aligned = 1, args.aligned_root
    return SliceSpec(
        n_slices=n_slices,
        base=base,
        sampler=sampler_config(args),
        seed=args.seed,
        aligned=aligned,
        joint=args.joint,
        level_loss=LossKind(args.level_loss),
        strategy=Strategy(args.strategy),
    )


def _load(path: Path) -> Dataset:
    return load_dataset(path / "manifest.json" if path.is_dir() else path)


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        out.write_text(text)
        logger.info(f"Wrote {out}")


def cmd_sample_tree(args: argparse.Namespace) -> str:
    loaded = [read_point_file(p, args.weighted) for p in args.points]
    embeddings = sample_aligned_root_trees(
        [pts for pts, _ in loaded], sampler_config(args), args.threads
    )
    sections = []
    for path, emb in zip(args.points, embeddings):
        lines = [f"# tree {path}", emb.tree.to_text().rstrip("\n"), "# node_of_point"]
        lines += [f"{i} {int(node)}" for i, node in enumerate(emb.node_of_point)]
        sections.append("\n".join(lines) + "\n")
    return "".join(sections)


def cmd_dist(args: argparse.Namespace) -> str:
    pts_a, w_a = read_point_file(args.a, args.weighted)
    pts_b, w_b = read_point_file(args.b, args.weighted)
    value = discrepancy(pts_a, pts_b, slice_spec(args, args.method), w_a, w_b, args.threads)
    return f"{value:.12g}\n"


def cmd_knn(args: argparse.Namespace) -> str:
    ds = _load(args.data)
    cfg = ExperimentConfig(
        spec=slice_spec(args, args.method),
        knn_k=tuple(args.k),
        split=args.split,
        repeats=args.repeats,
        seed=args.seed,
        task=Task(args.task),
        threads=args.threads,
    )
    return knn_experiment(ds, cfg).to_csv(timing=not args.omit_timing)


def cmd_kmeans(args: argparse.Namespace) -> str:
    ds = _load(args.data)
    spec = SliceSpec(n_slices=args.slices, sampler=sampler_config(args), seed=args.seed)
    result = kmeans(
        ds.points,
        args.clusters,
        spec,
        args.supports,
        args.max_iter,
        args.seed,
        ds.weights,
        args.threads,
    )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["measure_id", "cluster"])
    for name, cluster in zip(ds.names, result.assignment.tolist()):
        writer.writerow([name, cluster])
    writer.writerow(["inertia", f"{result.inertia:.12g}"])
    if ds.labels is not None:
        try:
            score = f_beta(result.assignment.tolist(), ds.labels)
        except DegenerateMeasureError as e:
            logger.warning(f"No F_beta summary: {e}")
        else:
            writer.writerow(["f_beta", f"{score:.12g}"])
    return buf.getvalue()


def cmd_bench(args: argparse.Namespace) -> str:
    ds = _load(args.data)
    report = bench(ds, slice_spec(args, args.method), args.pairs, args.seed, args.threads)
    return report.to_csv(timing=not args.omit_timing)


def cmd_emit_figure_data(args: argparse.Namespace) -> str:
    timing = not args.omit_timing
    if args.figure == "slices":
        if args.data is None:
            raise InputError("emit-figure-data slices needs --data")
        cfg = ExperimentConfig(
            spec=slice_spec(args, args.method),
            repeats=args.repeats,
            seed=args.seed,
            task=Task(args.task),
            threads=args.threads,
        )
        return slices_tradeoff(_load(args.data), cfg, args.slice_counts, timing)
    if args.figure == "sampling":
        if args.points is None:
            raise InputError("emit-figure-data sampling needs --points")
        if args.threads != 1:
            raise InputError("emit-figure-data sampling times single samples; drop --threads")
        pts, _ = read_point_file(args.points)
        return sampling_time(pts, args.depths, args.kappas, args.seed, timing)
    spec = SliceSpec(n_slices=args.slices, sampler=sampler_config(args), seed=args.seed)
    return kmeans_scaling(
        args.sizes,
        spec,
        args.supports,
        seed=args.seed,
        timing=timing,
        threads=args.threads,
        family=Family(args.family),
    )


COMMANDS = {
    "sample-tree": cmd_sample_tree,
    "dist": cmd_dist,
    "knn": cmd_knn,
    "kmeans": cmd_kmeans,
    "bench": cmd_bench,
    "emit-figure-data": cmd_emit_figure_data,
}


def _log_level(args: argparse.Namespace) -> int:
    if args.verbose:
        return logging.DEBUG
    if args.quiet:
        return logging.WARNING
    return logging.INFO


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and return its exit code."""
    args = build_parser().parse_args(argv)

    # stdout carries command output
    handler = ImmediateStreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s - %(message)s"))
    configure_logging(_log_level(args), handler)

    try:
        if args.threads < 1:
            raise InputError(f"--threads must be >= 1, got {args.threads}")
        _emit(COMMANDS[args.command](args), args.out)
    except InputError as e:
        print(f"treealign: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.exception(f"treealign {args.command} failed: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
