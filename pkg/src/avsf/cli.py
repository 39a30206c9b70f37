"""Command-line entry point.

Machine-readable output goes to stdout or files (CSV/JSON); human logs go to
stderr. Exit codes: 0 success, 1 validation/usage error, 2 partial failure
(skipped manifest entries). ``--seed`` and ``--threads`` are global;
AVSF_THREADS is the env fallback for --threads.
"""

import argparse
import json
import os
import sys

from . import alignment, cluster, encoder, evaluation, features, io, synthetic


_quiet = False


def _log(msg):
    if not _quiet:
        print(msg, file=sys.stderr)


def _fmt_score(x):
    return str(round(float(x), 12))


def _add_global_args(p):
    p.add_argument("--seed", type=int, default=7, help="global RNG seed")
    p.add_argument("--threads", type=int,
                   default=int(os.environ.get("AVSF_THREADS", "1")),
                   help="workers for manifest-parallel stages")
    p.add_argument("--log-level", default="info", choices=("quiet", "info"))


def _build_parser():
    parser = argparse.ArgumentParser(prog="avsf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mfcc", help="waveform -> stacked MFCC AVSF file")
    p.add_argument("--in", dest="src", required=True)
    p.add_argument("--out", dest="dest", required=True)
    p.add_argument("--stack", type=int, default=4)
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True)
    _add_global_args(p)

    p = sub.add_parser("cluster", help="fit a k-means codebook on feature frames")
    p.add_argument("--features", required=True, help="AVSF file of feature frames")
    p.add_argument("--C", dest="n_clusters", type=int, default=100)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--out", dest="dest", required=True)
    _add_global_args(p)

    p = sub.add_parser("train-toy", help="train the toy encoder on a synthetic world")
    p.add_argument("--world", required=True, help="world config JSON")
    p.add_argument("--C", dest="n_clusters", type=int, default=100)
    p.add_argument("--w", dest="context_window", type=int, default=5)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.3)
    p.add_argument("--n-train", type=int, default=60)
    p.add_argument("--frames", type=int, default=400)
    p.add_argument("--frontend-dim", type=int, default=16)
    p.add_argument("--refine-rounds", type=int, default=2)
    p.add_argument("--out", dest="dest", required=True)
    _add_global_args(p)

    p = sub.add_parser("embed", help="observations -> detection embeddings")
    p.add_argument("--encoder", required=True)
    p.add_argument("--in", dest="src", help="single AVSF file of observations")
    p.add_argument("--modality", choices=("visual", "audio"))
    p.add_argument("--out", dest="dest", help="output AVSF (single-file mode)")
    p.add_argument("--manifest", help="batch mode: manifest of observation files")
    p.add_argument("--out-dir", help="batch mode: output directory")
    _add_global_args(p)

    p = sub.add_parser("score", help="score one visual/audio AVSF pair")
    p.add_argument("--visual", required=True)
    p.add_argument("--audio", required=True)
    p.add_argument("--alignment", choices=("plain", "fixed", "dtw"), default="fixed")
    p.add_argument("--tau", type=int, default=15)
    p.add_argument("--band", type=int, default=None)
    _add_global_args(p)

    p = sub.add_parser("eval", help="evaluate a manifest, write a JSON report")
    p.add_argument("--manifest", required=True)
    p.add_argument("--alignment", choices=("plain", "fixed", "dtw"), default="fixed")
    p.add_argument("--tau", type=int, default=15)
    p.add_argument("--band", type=int, default=None)
    p.add_argument("--clip-seconds", type=float, default=None)
    p.add_argument("--sweep", choices=("tau", "clip"), default=None)
    p.add_argument("--hist-bins", type=int, default=50)
    p.add_argument("--scores-csv", default=None, help="also write per-video CSV report")
    p.add_argument("--out", dest="dest", required=True)
    _add_global_args(p)

    p = sub.add_parser("calibrate", help="threshold from real-only scores")
    p.add_argument("--scores", required=True, help="CSV report from eval")
    p.add_argument("--target-fpr", type=float, default=0.1)
    _add_global_args(p)

    p = sub.add_parser("synth", help="generate the synthetic benchmark")
    p.add_argument("--config", default=None, help="world JSON (default world if omitted)")
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--sizes", default="real=200,swap=200,lipsync=200,"
                                      "offset_fixed=200,offset_dynamic=200")
    p.add_argument("--frames", type=int, default=400)
    _add_global_args(p)

    p = sub.add_parser("robustness", help="embedding-noise robustness sweep")
    p.add_argument("--manifest", required=True)
    p.add_argument("--levels", default="0,0.1,0.2,0.4,0.8")
    p.add_argument("--alignment", choices=("plain", "fixed", "dtw"), default="fixed")
    p.add_argument("--tau", type=int, default=15)
    p.add_argument("--band", type=int, default=None)
    p.add_argument("--out", dest="dest", required=True)
    _add_global_args(p)

    return parser


def _alignment_config(args):
    mode = {"plain": "plain", "fixed": "fixed_offset", "dtw": "dtw"}[args.alignment]
    return alignment.AlignmentConfig(mode=mode, tau=args.tau, dtw_band=args.band)


def _cmd_mfcc(args):
    wave = io.read_wav(args.src)
    seq = features.waveform_to_embedding(wave, stack=args.stack,
                                         normalize=args.normalize)
    io.write_embeddings(seq, args.dest)
    _log(f"wrote {seq.frames} frames x {seq.dim} dims to {args.dest}")
    return 0


def _cmd_cluster(args):
    feats = io.read_embeddings(args.features)
    codebook = cluster.kmeans_fit(feats.data, args.n_clusters, seed=args.seed,
                                  max_iter=args.max_iter)
    cluster.write_codebook(codebook, args.dest)
    _log(f"fitted C={codebook.n_clusters} codebook on {feats.frames} frames")
    return 0


def _cmd_train_toy(args):
    world = synthetic.world_from_json(args.world)
    videos = synthetic.gen_real(world, args.frames, args.n_train, seed=args.seed)
    pairs = [(v.visual_obs, v.audio_obs) for v in videos]
    est, _ = encoder.fit_encoder_with_refinement(
        pairs, n_clusters=args.n_clusters, rounds=args.refine_rounds,
        context_window=args.context_window, random_state=args.seed,
        epochs=args.epochs, lr=args.lr, frontend_dim=args.frontend_dim,
    )
    encoder.write_encoder(est.model_, args.dest)
    _log(f"final epoch loss {est.loss_history_[-1]:.4f}; encoder -> {args.dest}")
    return 0


def _cmd_embed(args):
    enc = encoder.read_encoder(args.encoder)
    if args.manifest:
        if not args.out_dir:
            raise ValueError("--out-dir is required with --manifest")
        mf = io.load_manifest(args.manifest)
        base = os.path.dirname(args.manifest)
        os.makedirs(args.out_dir, exist_ok=True)
        entries = []
        for e in mf:
            for modality, rel in (("visual", e.visual_path), ("audio", e.audio_path)):
                src = rel if os.path.isabs(rel) else os.path.join(base, rel)
                seq = io.read_embeddings(src)
                out = encoder.embed(enc, seq.data, modality, fps=seq.fps)
                io.write_embeddings(out, os.path.join(args.out_dir,
                                                      os.path.basename(rel)))
            entries.append(io.ManifestEntry(
                id=e.id, label=e.label, category=e.category,
                visual_path=os.path.basename(e.visual_path),
                audio_path=os.path.basename(e.audio_path),
            ))
        io.save_manifest(io.Manifest(entries=entries),
                         os.path.join(args.out_dir, "manifest.jsonl"))
        _log(f"embedded {len(entries)} entries into {args.out_dir}")
        return 0
    if not (args.src and args.modality and args.dest):
        raise ValueError("single-file mode needs --in, --modality and --out")
    seq = io.read_embeddings(args.src)
    out = encoder.embed(enc, seq.data, args.modality, fps=seq.fps)
    io.write_embeddings(out, args.dest)
    return 0


def _cmd_score(args):
    ev = io.read_embeddings(args.visual)
    ea = io.read_embeddings(args.audio)
    result = alignment.score_sequences(ev.data, ea.data, _alignment_config(args))
    offset = "" if result.best_offset is None else result.best_offset
    print(f"{_fmt_score(result.score)},{offset}")
    return 0


def _cmd_eval(args):
    report = evaluation.evaluate(
        args.manifest, _alignment_config(args), clip_seconds=args.clip_seconds,
        hist_bins=args.hist_bins, threads=args.threads, sweep=args.sweep,
    )
    with open(args.dest, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    hist_csv = os.path.splitext(args.dest)[0] + ".histogram.csv"
    edges = report.histogram["edges"]
    with open(hist_csv, "w", encoding="utf-8") as fh:
        fh.write("bin_left,bin_right,real,fake\n")
        for i in range(len(edges) - 1):
            fh.write(f"{edges[i]},{edges[i + 1]},"
                     f"{report.histogram['real'][i]},{report.histogram['fake'][i]}\n")
    if args.scores_csv:
        io.write_report(report.scored, args.scores_csv)
    for entry in report.skipped:
        _log(f"skipped {entry['id']}: {entry['error']}")
    _log(f"auc_overall={report.auc_overall:.4f} "
         f"(n_real={report.n_real}, n_fake={report.n_fake})")
    return 2 if report.skipped else 0


def _cmd_calibrate(args):
    import csv

    with open(args.scores, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    real_scores = [float(r["score"]) for r in rows if r["label"] == "real"]
    threshold = evaluation.calibrate_threshold(real_scores, args.target_fpr)
    print(_fmt_score(threshold))
    return 0


def _cmd_synth(args):
    if args.config:
        world = synthetic.world_from_json(args.config)
    else:
        world = synthetic.make_world(seed=args.seed)
    sizes = {}
    for part in args.sizes.split(","):
        name, _, value = part.partition("=")
        if name not in synthetic.CATEGORIES:
            raise ValueError(f"unknown category {name!r} in --sizes")
        sizes[name.strip()] = int(value)
    manifest = synthetic.build_benchmark(world, sizes, args.out_dir,
                                         T=args.frames, seed=args.seed)
    if not args.config:
        synthetic.world_to_json(world, os.path.join(args.out_dir, "world.json"))
    _log(f"wrote {len(manifest)} videos to {args.out_dir}")
    return 0


def _cmd_robustness(args):
    levels = [float(x) for x in args.levels.split(",")]
    results = evaluation.robustness_sweep(
        args.manifest, levels, seed=args.seed, config=_alignment_config(args),
        threads=args.threads,
    )
    with open(args.dest, "w", encoding="utf-8") as fh:
        json.dump({str(k): v for k, v in results.items()}, fh, indent=2,
                  sort_keys=True)
        fh.write("\n")
    for sigma, value in results.items():
        _log(f"sigma={sigma}: auc={value:.4f}")
    return 0


_COMMANDS = {
    "mfcc": _cmd_mfcc,
    "cluster": _cmd_cluster,
    "train-toy": _cmd_train_toy,
    "embed": _cmd_embed,
    "score": _cmd_score,
    "eval": _cmd_eval,
    "calibrate": _cmd_calibrate,
    "synth": _cmd_synth,
    "robustness": _cmd_robustness,
}


def run(argv=None):
    global _quiet
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    if getattr(args, "threads", 1) < 1:
        _log("--threads must be >= 1")
        return 1
    _quiet = getattr(args, "log_level", "info") == "quiet"
    try:
        return _COMMANDS[args.command](args)
    except (io.AvsfError, ValueError, OSError) as exc:
        _log(f"error: {exc}")
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
