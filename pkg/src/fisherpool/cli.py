"""Command-line pipeline: train models, encode, pool, classify, benchmark.

Every subcommand writes its declared outputs plus a JSON metadata sidecar
(<output>.meta.json) recording the full configuration, seed, thread count,
package version, and wall time, sufficient to re-run the command.

Exit codes: 0 success, 2 usage error (message names the offending flag),
1 runtime error.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, analysis, formats, synth
from .classify import LinearSvm, evaluate
from .encode import (BagOfWordsEncoder, FisherVectorEncoder,
                     SparseFisherVectorEncoder, l2_normalize, power_normalize)
from .gmm import GaussianMixtureEM
from .pca import PCA
from .pooling import gmp_primal


class UsageError(Exception):
    """Invalid flag combination; maps to exit code 2."""


def _default_threads():
    raw = os.environ.get("FISHERPOOL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _write_sidecar(out_path, command, config, wall_time):
    sidecar = {
        "command": command,
        "config": config,
        "package_version": __version__,
        "wall_time_seconds": wall_time,
    }
    with open(f"{out_path}.meta.json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=1, default=formats._jsonable)
        fh.write("\n")


def _config_dict(args, keys):
    return {key: getattr(args, key) for key in keys}


def _load_descriptor_dir(path):
    """Descriptor sets from a directory: labels.csv order when present,
    else sorted *.fvd names. Returns (sets, labels_or_None, names)."""
    folder = Path(path)
    labels_file = folder / "labels.csv"
    if labels_file.exists():
        names, labels = [], []
        with open(labels_file, "r", encoding="utf-8") as fh:
            header = fh.readline()
            if header.strip() != "filename,label":
                raise formats.FormatError(
                    f"{labels_file}: expected header 'filename,label'")
            for line in fh:
                if not line.strip():
                    continue
                name, label = line.strip().split(",", 1)
                names.append(name)
                labels.append(label)
        sets = [formats.read_descriptors(folder / name) for name in names]
        return sets, labels, names
    names = sorted(p.name for p in folder.glob("*.fvd"))
    if not names:
        raise UsageError(f"--in directory {path} contains no .fvd files")
    sets = [formats.read_descriptors(folder / name) for name in names]
    return sets, None, names


# ---------------------------------------------------------------- commands

def _cmd_train_gmm(args):
    X = formats.read_descriptors(args.infile)
    trainer = GaussianMixtureEM(
        n_components=args.components, max_iter=args.max_iter, tol=args.tol,
        seed=args.seed)
    with threadpool_limits(limits=args.threads):
        trainer.fit(X)
    formats.save_model(args.out, trainer.model_, metadata={
        "seed": args.seed,
        "iterations": trainer.n_iter_,
        "final_log_likelihood": trainer.log_likelihood_trace_[-1],
        "fit_log": trainer.fit_log_,
    })
    print(f"trained gmm: M={args.components}, iterations={trainer.n_iter_}, "
          f"mean log-likelihood={trainer.log_likelihood_trace_[-1]:.6f}")
    return [args.out]


def _cmd_train_pca(args):
    X = formats.read_descriptors(args.infile)
    model = PCA(n_components=args.dim)
    with threadpool_limits(limits=args.threads):
        model.fit(X)
    formats.save_model(args.out, model, metadata={
        "seed": args.seed,
        "explained_variance_ratio": model.explained_variance_ratio_.tolist(),
    })
    print(f"trained pca: {X.shape[1]} -> {args.dim} dims, "
          f"explained {model.explained_variance_ratio_.sum():.4f}")
    return [args.out]


def _build_encoder(args):
    if args.mode in ("fv", "sfv"):
        if not args.gmm:
            raise UsageError(f"--mode {args.mode} requires --gmm")
        mixture = formats.load_model(args.gmm)
        if args.mode == "fv":
            return FisherVectorEncoder(mixture, normalize=not args.no_normalize)
        if args.k > mixture.n_components:
            raise UsageError(
                f"--k ({args.k}) must not exceed the GMM component count "
                f"M={mixture.n_components}")
        return SparseFisherVectorEncoder(mixture, top_k=args.k,
                                         normalize=not args.no_normalize)
    if args.mode == "bow":
        if args.codebook:
            centers = formats.read_descriptors(args.codebook)
            return BagOfWordsEncoder.from_codebook(centers)
        if args.gmm:
            return BagOfWordsEncoder.from_codebook(formats.load_model(args.gmm))
        raise UsageError("--mode bow requires --codebook or --gmm")
    raise UsageError(f"--mode must be fv, sfv, or bow, got {args.mode!r}")


def _cmd_encode(args):
    encoder = _build_encoder(args)
    pca = formats.load_model(args.pca) if args.pca else None
    outputs = [args.out]
    with threadpool_limits(limits=args.threads):
        if os.path.isdir(args.infile):
            sets, labels, _ = _load_descriptor_dir(args.infile)
            if pca is not None:
                sets = [pca.transform(X) for X in sets]
            codes = encoder.transform(sets)
            formats.write_descriptors(args.out, codes)
            if labels is not None:
                labels_out = f"{args.out}.labels.txt"
                formats.write_labels(labels_out, labels)
                outputs.append(labels_out)
            print(f"encoded {len(sets)} descriptor sets -> {codes.shape}")
        else:
            X = formats.read_descriptors(args.infile)
            if pca is not None:
                X = pca.transform(X)
            code = encoder.encode(X)
            formats.write_descriptors(args.out, code[None, :])
            print(f"encoded {X.shape[0]} descriptors -> code length {code.size}")
    return outputs


def _cmd_pool(args):
    codes = formats.read_descriptors(args.codes)
    with threadpool_limits(limits=args.threads):
        if args.method == "gmp":
            pooled = gmp_primal(codes, args.lam)
        elif args.method == "sum":
            pooled = codes.sum(axis=0) / codes.shape[0]
        else:
            raise UsageError(f"--method must be gmp or sum, got {args.method!r}")
        if args.normalize:
            pooled = l2_normalize(power_normalize(pooled))
    formats.write_descriptors(args.out, pooled[None, :])
    print(f"pooled {codes.shape[0]} codes with {args.method} "
          f"(lam={args.lam}) -> length {pooled.size}")
    return [args.out]


def _cmd_classify(args):
    Xtr = formats.read_descriptors(args.train_codes)
    ytr = formats.read_labels(args.train_labels)
    Xte = formats.read_descriptors(args.test_codes)
    yte = formats.read_labels(args.test_labels)
    model = LinearSvm(reg=args.reg, epochs=args.epochs, seed=args.seed)
    with threadpool_limits(limits=args.threads):
        model.fit(Xtr, np.array(ytr))
        predictions = model.predict(Xte)
        scores = model.decision_function(Xte)
        metrics = evaluate(np.array(yte), predictions, score_matrix=scores,
                           classes=model.classes_)
    formats.write_summary(args.out, {
        "metrics": metrics,
        "n_train": Xtr.shape[0],
        "n_test": Xte.shape[0],
        "classes": [formats._jsonable(c) for c in model.classes_],
    })
    outputs = [args.out]
    if args.model_out:
        formats.save_model(args.model_out, model,
                           metadata={"seed": args.seed})
        outputs.append(args.model_out)
    print(f"accuracy={metrics['accuracy']:.4f} "
          f"mAP={metrics['mean_average_precision']:.4f}")
    return outputs


def _cmd_bench(args):
    modes = args.modes.split(",")
    for mode in modes:
        if mode not in ("fv", "sfv"):
            raise UsageError(f"--modes entries must be fv or sfv, got {mode!r}")
    m_values = [int(v) for v in args.M.split(",")]
    for M in m_values:
        if args.k > M:
            raise UsageError(f"--k ({args.k}) must not exceed --M entry {M}")
    sets = synth.benchmark_sets(args.images, args.descriptors, args.dim,
                                args.seed)
    rows = []
    ratios = {}
    for M in m_values:
        mixture = synth.random_mixture(M, args.dim, args.seed + M)
        reports = {}
        for mode in modes:
            report = analysis.bench_encode(mixture, sets, mode, k=args.k,
                                           repetitions=args.reps,
                                           threads=args.threads)
            reports[mode] = report
            rows.append(report.to_row())
            print(f"{mode} M={M}: {report.median_seconds_per_image:.4f} s/image "
                  f"(IQR {report.iqr_seconds:.4f})")
        if "fv" in reports and "sfv" in reports:
            measured = (reports["fv"].median_seconds_per_image
                        / reports["sfv"].median_seconds_per_image)
            predicted = analysis.predicted_speedup(M, args.dim, args.k)
            ratios[str(M)] = {"measured": measured, "predicted": predicted}
            print(f"  ratio at M={M}: measured {measured:.2f}, "
                  f"predicted {predicted:.2f}")
    formats.write_report(args.out, analysis.TIMING_CSV_HEADER, rows)
    outputs = [args.out]
    if args.summary:
        formats.write_summary(args.summary, {
            "ratios": ratios,
            "config": _config_dict(args, ("modes", "M", "k", "dim",
                                          "descriptors", "images", "reps",
                                          "seed", "threads")),
        })
        outputs.append(args.summary)
    return outputs


def _cmd_similarity(args):
    mixture = formats.load_model(args.gmm)
    X = formats.read_descriptors(args.infile)
    if args.k > mixture.n_components:
        raise UsageError(
            f"--k ({args.k}) must not exceed the GMM component count "
            f"M={mixture.n_components}")
    if args.sample and args.sample < X.shape[0]:
        rng = np.random.default_rng(args.seed)
        X = X[rng.choice(X.shape[0], size=args.sample, replace=False)]
    rows = []
    summary = {}
    with threadpool_limits(limits=args.threads):
        for mode in ("fv", "sfv"):
            report = analysis.similarity_correspondence(mixture, X, mode,
                                                        k=args.k)
            summary[mode] = {
                "pearson_r": report.pearson,
                "n_pairs": report.n_pairs,
                "n_excluded": report.n_excluded,
            }
            rows.extend(
                (mode, i, ds, cs) for i, (ds, cs) in enumerate(
                    zip(report.descriptor_similarity, report.code_similarity)))
            r_text = f"{report.pearson:.4f}" if report.r_defined else "undefined"
            print(f"{mode}: pearson r = {r_text} over {report.n_pairs} pairs "
                  f"({report.n_excluded} excluded)")
    formats.write_report(args.out, ("encoder", "pair", "descriptor_similarity",
                                    "code_similarity"), rows)
    outputs = [args.out]
    if args.summary:
        formats.write_summary(args.summary, {"results": summary})
        outputs.append(args.summary)
    return outputs


def _cmd_synth(args):
    rng_label = f"seed={args.seed}"
    if args.kind == "cloud":
        X = synth.descriptor_cloud(args.n, args.dim, args.seed)
        formats.write_descriptors(args.out, X)
        print(f"wrote {X.shape[0]}x{X.shape[1]} cloud ({rng_label})")
        return [args.out]
    if args.kind == "ring":
        mixture, X = synth.ring_similarity_world(args.seed,
                                                 n_descriptors=args.n)
        formats.write_descriptors(args.out, X)
        outputs = [args.out]
        if args.gmm_out:
            formats.save_model(args.gmm_out, mixture,
                               metadata={"seed": args.seed,
                                         "kind": "ring-world"})
            outputs.append(args.gmm_out)
        print(f"wrote ring world: {X.shape[0]} descriptors ({rng_label})")
        return outputs
    if args.kind in ("blobs", "varcontrast"):
        if not args.out_dir:
            raise UsageError(f"--kind {args.kind} requires --out-dir")
        if args.kind == "blobs":
            sets, labels = synth.blob_images(
                args.classes, args.images_per_class, args.descriptors,
                args.dim, args.seed, world_seed=args.world_seed)
        else:
            sets, labels, _ = synth.variance_contrast_images(
                args.images_per_class, args.descriptors, args.dim, args.seed,
                world_seed=args.world_seed)
        folder = Path(args.out_dir)
        folder.mkdir(parents=True, exist_ok=True)
        lines = []
        for i, (X, label) in enumerate(zip(sets, labels)):
            name = f"img_{i:05d}.fvd"
            formats.write_descriptors(folder / name, X)
            lines.append(f"{name},{label}")
        with open(folder / "labels.csv", "w", encoding="utf-8") as fh:
            fh.write("filename,label\n")
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {len(sets)} descriptor sets to {folder} ({rng_label})")
        return [str(folder / "labels.csv")]
    raise UsageError(
        f"--kind must be cloud, ring, blobs, or varcontrast, got {args.kind!r}")


# ------------------------------------------------------------------ parser

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="fisherpool",
        description="Fisher vector / sparse Fisher vector encoding pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=_default_threads(),
                       help="BLAS thread limit (env FISHERPOOL_THREADS)")

    p = sub.add_parser("train-gmm", help="EM-train a Gaussian mixture")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--components", "--M", dest="components", type=int,
                   default=256)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=_cmd_train_gmm)

    p = sub.add_parser("train-pca", help="fit a PCA projection")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=_cmd_train_pca)

    p = sub.add_parser("encode", help="encode descriptors into image codes")
    p.add_argument("--mode", default="fv", choices=("fv", "sfv", "bow"))
    p.add_argument("--gmm")
    p.add_argument("--codebook", help="centroid .fvd file for bow mode")
    p.add_argument("--pca", help="apply this PCA model before encoding")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--in", dest="infile", required=True,
                   help=".fvd file or directory of .fvd files")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("pool", help="pool per-descriptor code rows")
    p.add_argument("--codes", required=True)
    p.add_argument("--method", default="gmp", choices=("gmp", "sum"))
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=_cmd_pool)

    p = sub.add_parser("classify", help="train and evaluate a linear SVM")
    p.add_argument("--train-codes", required=True)
    p.add_argument("--train-labels", required=True)
    p.add_argument("--test-codes", required=True)
    p.add_argument("--test-labels", required=True)
    p.add_argument("--reg", type=float, default=1e-4)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--model-out")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("bench", help="time the encoders on synthetic data")
    p.add_argument("--modes", default="fv,sfv")
    p.add_argument("--M", default="64,128,256")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--descriptors", type=int, default=3000,
                   help="descriptors per image")
    p.add_argument("--images", type=int, default=2)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--out", required=True)
    p.add_argument("--summary")
    common(p)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("similarity",
                       help="descriptor-vs-code similarity correspondence")
    p.add_argument("--gmm", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--sample", type=int, default=200)
    p.add_argument("--out", required=True)
    p.add_argument("--summary")
    common(p)
    p.set_defaults(func=_cmd_similarity)

    p = sub.add_parser("synth", help="generate seeded synthetic datasets")
    p.add_argument("--kind", required=True,
                   choices=("cloud", "ring", "blobs", "varcontrast"))
    p.add_argument("--n", type=int, default=1000,
                   help="descriptor count for cloud/ring kinds")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--images-per-class", type=int, default=20)
    p.add_argument("--descriptors", type=int, default=50,
                   help="descriptors per image")
    p.add_argument("--out", help="output .fvd for cloud/ring")
    p.add_argument("--gmm-out", help="ring kind: write the world's GMM here")
    p.add_argument("--out-dir", help="output directory for blobs/varcontrast")
    p.add_argument("--world-seed", type=int, default=0,
                   help="class-structure seed shared across train/test splits")
    common(p)
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    if args.command == "synth" and args.kind in ("cloud", "ring") and not args.out:
        print("error: --out is required for --kind cloud/ring", file=sys.stderr)
        return 2
    start = time.perf_counter()
    try:
        outputs = args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures carry context, exit 1
        print(f"error [{args.command}]: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 1
    wall = time.perf_counter() - start
    config = {key: value for key, value in vars(args).items()
              if key not in ("func", "command")}
    for out_path in outputs:
        _write_sidecar(out_path, args.command, config, wall)
    return 0


if __name__ == "__main__":
    sys.exit(main())
