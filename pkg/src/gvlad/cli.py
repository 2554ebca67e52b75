"""Command-line driver for the gVLAD pipeline.

Every subcommand prints one JSON object on stdout summarising what it did.
Exit status: 0 success, 1 validation error, 2 I/O or format error,
3 numerical failure.

Typical run::

    gvlad synth --out data --classes 20 --images-per-class 20
    gvlad train-codebook --manifest data/manifest.json --k 8 --out cb.bin
    gvlad learn-angles --manifest data/manifest.json --bins 4 --out angles.json
    gvlad encode --manifest data/manifest.json --codebook cb.bin --angles angles.json --out db.gvev
    gvlad fit-whitening --vectors db.gvev --rho 128 --out pca.bin
    gvlad apply-whitening --vectors db.gvev --model pca.bin --out db128.gvev
    gvlad evaluate --index db128.gvev --ground-truth data/ground_truth.txt --report report.json
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .angle_model import AngleModel, learn_angle_membership
from .codebook import DEFAULT_K, Codebook, adapt_codebook, train_codebook
from .errors import GvladError, NumericalError
from .io import (
    load_manifest,
    map_report,
    read_ground_truth,
    read_vectors,
    write_rankings,
    write_vectors,
)
from .pipeline import encode_collection, pool_training_data, whiten_collection
from .retrieval import evaluate, query_knn
from .synthetic import generate_synthetic
from .whitening import DEFAULT_EPSILON, DEFAULT_RHO, WhiteningModel, fit_whitening


class _Timer:
    def __init__(self):
        self.stages = {}

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        yield
        self.stages[name] = round((time.perf_counter() - t0) * 1000.0, 3)


def _cmd_synth(args, timer):
    with timer.stage("generate"):
        m = generate_synthetic(
            args.out, args.classes, args.images_per_class, args.descriptors_per_image,
            d=args.dim, angle_signal=args.angle_signal, seed=args.seed,
            components=args.components, shared_appearance=not args.class_appearance,
        )
    return {"manifest": str(Path(args.out) / "manifest.json"), "images": len(m.images),
            "queries": len(m.queries), "d": args.dim}


def _cmd_learn_angles(args, timer):
    m = load_manifest(args.manifest)
    with timer.stage("load"):
        _, angles = pool_training_data(m.iter_images(), args.max_descriptors, args.seed)
    with timer.stage("kmeans"):
        model, result = learn_angle_membership(angles, args.bins, seed=args.seed,
                                               restarts=args.restarts, r=args.radius,
                                               return_result=True)
    model.save(args.out)
    return {"out": args.out, "M": model.M, "angles": int(angles.size),
            "objective": result.objective,
            "boundaries": [float(b) for b in model.boundaries()]}


def _cmd_train_codebook(args, timer):
    m = load_manifest(args.manifest)
    with timer.stage("load"):
        x, _ = pool_training_data(m.iter_images(), args.max_descriptors, args.seed)
    with timer.stage("kmeans"):
        cb, result = train_codebook(x, args.k, seed=args.seed, restarts=args.restarts,
                                    return_result=True)
    cb.save(args.out)
    return {"out": args.out, "K": cb.K, "d": cb.d, "descriptors": int(x.shape[0]),
            "objective": result.objective}


def _cmd_adapt_codebook(args, timer):
    source = Codebook.load(args.codebook)
    m = load_manifest(args.manifest)
    with timer.stage("load"):
        x, _ = pool_training_data(m.iter_images(), args.max_descriptors, args.seed)
    with timer.stage("adapt"):
        cb = adapt_codebook(source, x, divisor=args.divisor.replace("-", "_"))
    cb.save(args.out)
    shift = float(np.linalg.norm(cb.centroids - source.centroids, axis=1).max())
    return {"out": args.out, "K": cb.K, "d": cb.d, "descriptors": int(x.shape[0]),
            "max_centroid_shift": shift}


def _cmd_encode(args, timer):
    m = load_manifest(args.manifest)
    cb = Codebook.load(args.codebook)
    am = AngleModel.load(args.angles) if args.angles else None
    items = m.iter_images() if args.set == "images" else m.iter_queries()
    with timer.stage("load"):
        items = list(items)
    with timer.stage("encode"):
        vs = encode_collection(items, cb, am, workers=args.workers, intra=not args.no_intra,
                               zscore=not args.no_zscore, l2=not args.no_l2, ssr=args.ssr)
    write_vectors(args.out, vs)
    return {"out": args.out, "count": len(vs), "K": vs.K, "d": vs.d, "M": vs.M, "dim": vs.dim}


def _cmd_fit_whitening(args, timer):
    vs = read_vectors(args.vectors)
    with timer.stage("fit"):
        model = fit_whitening(vs.values, args.rho, epsilon=args.epsilon)
    model.save(args.out)
    return {"out": args.out, "D": model.D, "rho": model.rho,
            "top_eigenvalue": float(model.eigenvalues[0])}


def _cmd_apply_whitening(args, timer):
    vs = read_vectors(args.vectors)
    model = WhiteningModel.load(args.model)
    if args.rho is not None:
        model = model.truncate(args.rho)
    with timer.stage("project"):
        out = whiten_collection(vs, model, whiten=not args.no_whiten)
    write_vectors(args.out, out)
    return {"out": args.out, "count": len(out), "dim": out.dim, "whiten": not args.no_whiten}


def _cmd_search(args, timer):
    index = read_vectors(args.index).to_index()
    queries = read_vectors(args.queries) if args.queries else read_vectors(args.index)
    rankings = {}
    with timer.stage("search"):
        for qid, q in queries:
            rankings[qid] = query_knn(index, q, args.k, exclude=None if args.keep_self else qid)
    write_rankings(args.out, rankings)
    return {"out": args.out, "queries": len(rankings), "index_size": len(index), "dim": index.dim}


def _cmd_evaluate(args, timer):
    index = read_vectors(args.index).to_index()
    queries = read_vectors(args.queries) if args.queries else read_vectors(args.index)
    if args.ground_truth:
        truth = read_ground_truth(args.ground_truth)
    else:
        truth = load_manifest(args.manifest, check_files=False).load_ground_truth()
    with timer.stage("search"):
        ev = evaluate(index, queries.as_dict(), truth, k=args.k, exclude_self=not args.keep_self)
    report = map_report(ev.aps)
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=1) + "\n")
    if args.rankings:
        write_rankings(args.rankings, ev.rankings)
    return {"map": report["map"], "n_queries": report["n_queries"], "index_size": len(index),
            "dim": index.dim, "report": args.report}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="root random seed")
    common.add_argument("--timing", action="store_true", help="report per-stage wall time (ms)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="gvlad", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--classes", type=int, default=20)
    s.add_argument("--images-per-class", type=int, default=20)
    s.add_argument("--descriptors-per-image", type=int, default=100)
    s.add_argument("--dim", type=int, default=8)
    s.add_argument("--components", type=int, default=8)
    s.add_argument("--angle-signal", type=float, default=1.0)
    s.add_argument("--class-appearance", action="store_true",
                   help="give each class its own mixture weights")
    s.set_defaults(func=_cmd_synth)

    s = sub.add_parser("learn-angles", parents=[common], help="learn the angle membership function")
    s.add_argument("--manifest", required=True)
    s.add_argument("--bins", type=int, default=4)
    s.add_argument("--restarts", type=int, default=10)
    s.add_argument("--radius", type=float, default=1.0)
    s.add_argument("--max-descriptors", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_learn_angles)

    s = sub.add_parser("train-codebook", parents=[common], help="k-means visual vocabulary")
    s.add_argument("--manifest", required=True)
    s.add_argument("--k", type=int, default=DEFAULT_K)
    s.add_argument("--restarts", type=int, default=10)
    s.add_argument("--max-descriptors", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_train_codebook)

    s = sub.add_parser("adapt-codebook", parents=[common], help="adapt a codebook to a new corpus")
    s.add_argument("--codebook", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--divisor", choices=["per-word", "global"], default="per-word")
    s.add_argument("--max-descriptors", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_adapt_codebook)

    s = sub.add_parser("encode", parents=[common], help="encode images to (g)VLAD signatures")
    s.add_argument("--manifest", required=True)
    s.add_argument("--codebook", required=True)
    s.add_argument("--angles", help="angle model; omit for plain VLAD")
    s.add_argument("--set", choices=["images", "queries"], default="images")
    s.add_argument("--no-intra", action="store_true")
    s.add_argument("--no-zscore", action="store_true")
    s.add_argument("--no-l2", action="store_true")
    s.add_argument("--ssr", action="store_true", help="signed square root after aggregation")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_encode)

    s = sub.add_parser("fit-whitening", parents=[common], help="fit PCA whitening")
    s.add_argument("--vectors", required=True)
    s.add_argument("--rho", type=int, default=DEFAULT_RHO)
    s.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_fit_whitening)

    s = sub.add_parser("apply-whitening", parents=[common], help="project signatures")
    s.add_argument("--vectors", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--rho", type=int, help="keep only the leading rho components")
    s.add_argument("--no-whiten", action="store_true", help="plain PCA projection")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_apply_whitening)

    for name, func, hlp in (("search", _cmd_search, "rank the index for each query"),
                            ("evaluate", _cmd_evaluate, "mAP against ground truth")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("--index", required=True, help="signature file to search")
        s.add_argument("--queries", help="query signature file (default: the index itself)")
        s.add_argument("--k", type=int, default=None if name == "evaluate" else 100)
        s.add_argument("--keep-self", action="store_true",
                       help="do not drop the query's own id from its ranking")
        if name == "search":
            s.add_argument("--out", required=True)
        else:
            g = s.add_mutually_exclusive_group(required=True)
            g.add_argument("--ground-truth")
            g.add_argument("--manifest")
            s.add_argument("--report")
            s.add_argument("--rankings")
        s.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    timer = _Timer()
    try:
        summary = args.func(args, timer)
    except GvladError as exc:
        print(f"gvlad {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"gvlad {args.command}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"gvlad {args.command}: {exc}", file=sys.stderr)
        return 1
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"gvlad {args.command}: numerical failure: {exc}", file=sys.stderr)
        return NumericalError.exit_code
    summary = {"command": args.command, "seed": args.seed, **summary}
    if args.timing:
        summary["timing_ms"] = timer.stages
    print(json.dumps(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
