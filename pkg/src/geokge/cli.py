"""Command-line interface.

Subcommands: synth, split, build-features, train, evaluate, predict.
Usage errors exit 1; runtime failures (bad files, mismatched
vocabularies, invalid values) exit 2; success exits 0. Output files are
deterministic for a fixed input and seed; run headers carry no
timestamps so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__, evaluate as ev, features as ft, kernels, synth as sy, train as tr
from .errors import GeokgeError
from .geometry import Geometry, project_equirect, read_geometry_file, write_geometry_file
from .kgdata import (
    Triple,
    Vocabulary,
    build_filter_index,
    ingest_triples,
    split_dataset,
    write_triples,
)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _ratio(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected TRAIN:VALID:TEST, got {text!r}")
    try:
        vals = tuple(float(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    return vals


def _load_vocab_file(path) -> Vocabulary:
    with open(path, encoding="utf-8") as fh:
        return Vocabulary(line.rstrip("\n") for line in fh if line.strip())


def _write_vocab_file(path, vocab: Vocabulary) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for name in vocab.names:
            fh.write(name + "\n")


def _resolve_vocabs(triples_path, entities_arg, relations_arg):
    """Explicit vocab files win; otherwise sibling entities.txt/relations.txt
    of the triples file are used when present; otherwise vocabularies grow
    from the triples alone."""
    base = os.path.dirname(os.path.abspath(triples_path))
    if entities_arg:
        ev_ = _load_vocab_file(entities_arg)
    else:
        p = os.path.join(base, "entities.txt")
        ev_ = _load_vocab_file(p) if os.path.exists(p) else None
    if relations_arg:
        rv = _load_vocab_file(relations_arg)
    else:
        p = os.path.join(base, "relations.txt")
        rv = _load_vocab_file(p) if os.path.exists(p) else None
    return ev_, rv


def _write_kv(path, pairs: dict[str, str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in pairs:
            fh.write(f"{key} = {pairs[key]}\n")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_synth(args) -> int:
    cfg = sy.GenConfig(
        n_entities=args.entities, n_triples=args.triples,
        noise_rate=args.noise, seed=args.seed, extent=args.extent,
    )
    result = sy.generate(cfg)
    os.makedirs(args.out, exist_ok=True)
    write_geometry_file(os.path.join(args.out, "geoms.tsv"), result.geoms)
    with open(os.path.join(args.out, "triples.tsv"), "w", encoding="utf-8") as fh:
        for h, r, t in result.triples:
            fh.write(f"{h}\t{r}\t{t}\n")
    with open(os.path.join(args.out, "groups.tsv"), "w", encoding="utf-8") as fh:
        for term, arch in result.groups:
            fh.write(f"{term}\t{arch}\n")
    with open(os.path.join(args.out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(sy.format_report(result))
    print(f"wrote {len(result.triples)} triples over {len(result.entities)} entities to {args.out}")
    return 0


def _cmd_split(args) -> int:
    entity_vocab, relation_vocab, triples = ingest_triples(args.triples)
    splits = split_dataset(triples, args.ratio, args.seed)
    os.makedirs(args.out, exist_ok=True)
    for name, part in (("train", splits.train), ("valid", splits.valid), ("test", splits.test)):
        write_triples(os.path.join(args.out, f"{name}.tsv"), part, entity_vocab, relation_vocab)
    _write_vocab_file(os.path.join(args.out, "entities.txt"), entity_vocab)
    _write_vocab_file(os.path.join(args.out, "relations.txt"), relation_vocab)
    _write_kv(os.path.join(args.out, "manifest.txt"), {
        "ratio": ":".join(repr(v) if v != int(v) else str(int(v)) for v in args.ratio),
        "seed": str(args.seed),
        "n_total": str(len(triples)),
        "n_train": str(len(splits.train)),
        "n_valid": str(len(splits.valid)),
        "n_test": str(len(splits.test)),
        "entity_vocab_sha256": entity_vocab.content_hash(),
        "relation_vocab_sha256": relation_vocab.content_hash(),
    })
    print(f"split {len(triples)} triples into "
          f"{len(splits.train)}/{len(splits.valid)}/{len(splits.test)} at {args.out}")
    return 0


def _mean_vertex_lat(geoms) -> float:
    total = 0.0
    count = 0
    for g in geoms.values():
        for _, lat in g.coords:
            total += lat
            count += 1
    return total / count


def _cmd_build_features(args) -> int:
    entity_vocab, _, triples = ingest_triples(args.triples, *_resolve_vocabs(
        args.triples, args.entities, args.relations))
    geoms = read_geometry_file(args.geoms)
    if args.lonlat:
        ref_lat = _mean_vertex_lat(geoms)
        geoms = {
            name: Geometry(g.kind, tuple(project_equirect(g.coords, ref_lat)))
            for name, g in geoms.items()
        }
    fs = ft.extract_pair_features(triples, entity_vocab, geoms, args.dis_bins)
    ft.write_features(args.out, fs, entity_vocab)
    msg = f"wrote features for {len(fs.pairs)} pairs to {args.out}"
    if fs.missing:
        msg += f" ({len(fs.missing)} entities had no geometry)"
    print(msg)
    return 0


def _build_train_config(args, have_features: bool) -> tr.TrainConfig:
    file_vals = tr.parse_config_file(args.config) if args.config else {}
    overrides = {
        "k": args.k, "gamma": args.gamma, "lr": args.lr,
        "neg_rate": args.neg_rate, "epochs": args.epochs, "batch_size": args.batch,
        "adversarial_temperature": args.adv_temp, "align_weight": args.align_weight,
        "seed": args.seed,
    }
    if args.kinds is not None:
        overrides["enabled_kinds"] = tr.parse_kinds(args.kinds)
    elif "enabled_kinds" not in file_vals and have_features:
        overrides["enabled_kinds"] = ft.KINDS
    return tr.config_from(file_vals, **overrides)


def _cmd_train(args) -> int:
    entity_vocab, relation_vocab, train_triples = ingest_triples(
        args.triples, *_resolve_vocabs(args.triples, args.entities, args.relations))
    have_features = bool(args.features)
    cfg = _build_train_config(args, have_features)

    if have_features:
        fs = ft.read_features(args.features, entity_vocab)
        feat_sizes = fs.sizes()
        pairs = ft.build_alignment_pairs(train_triples, fs, cfg.enabled_kinds)
    else:
        feat_sizes = {kind: 1 for kind in ft.KINDS}
        pairs = []

    os.makedirs(args.out, exist_ok=True)
    header = dict(sorted({
        "command": "train",
        "geokge_version": __version__,
        "numpy_version": np.__version__,
        "backend": kernels.BACKEND,
        "triples": os.path.basename(args.triples),
        "features": os.path.basename(args.features) if have_features else "(none)",
        "n_train": str(len(train_triples)),
        "n_alignment_pairs": str(len(pairs)),
        "entity_vocab_sha256": entity_vocab.content_hash(),
        "relation_vocab_sha256": relation_vocab.content_hash(),
        **cfg.as_meta(),
    }.items()))
    _write_kv(os.path.join(args.out, "run_header.txt"), header)

    log = print if args.verbose else None
    result = tr.train(
        train_triples, len(entity_vocab), len(relation_vocab),
        feat_sizes, pairs, cfg, log=log,
    )

    meta = dict(cfg.as_meta())
    meta.update({
        "epoch": str(cfg.epochs),
        "rng_digest": result.rng_digest,
        "entity_vocab_sha256": entity_vocab.content_hash(),
        "relation_vocab_sha256": relation_vocab.content_hash(),
    })
    ckpt_path = os.path.join(args.out, "model.ckpt")
    tr.save_checkpoint(ckpt_path, result.es, cfg.epochs, meta)
    with open(os.path.join(args.out, "loss_curve.tsv"), "w", encoding="utf-8") as fh:
        fh.write("epoch\ttriplet_loss\talign_loss\n")
        for i, (tl, al) in enumerate(result.loss_curve, 1):
            fh.write(f"{i}\t{tl!r}\t{al!r}\n")
    final = result.loss_curve[-1] if result.loss_curve else (float("nan"), float("nan"))
    print(f"trained {cfg.epochs} epochs; final triplet_loss={final[0]:.6f} "
          f"align_loss={final[1]:.6f}; checkpoint at {ckpt_path}")
    return 0


def _load_eval_inputs(args):
    entity_vocab, relation_vocab, train_triples = ingest_triples(
        args.train, *_resolve_vocabs(args.train, args.entities, args.relations))
    ckpt = tr.load_checkpoint(args.checkpoint)
    for key, vocab in (("entity_vocab_sha256", entity_vocab),
                       ("relation_vocab_sha256", relation_vocab)):
        expect = ckpt.meta.get(key)
        if expect is not None and expect != vocab.content_hash():
            raise tr.CheckpointError(
                f"{key} mismatch: checkpoint was trained on a different vocabulary "
                f"({expect[:12]}.. vs {vocab.content_hash()[:12]}..)"
            )
    extra = []
    for path in (args.valid, args.test):
        if path:
            extra.append(ingest_triples(path, entity_vocab, relation_vocab)[2])
    tr.check_space_dims(ckpt.es, len(entity_vocab), len(relation_vocab))
    return entity_vocab, relation_vocab, train_triples, extra, ckpt


def _cmd_evaluate(args) -> int:
    entity_vocab, relation_vocab, train_triples, extra, ckpt = _load_eval_inputs(args)
    _, _, eval_triples = ingest_triples(args.triples, entity_vocab, relation_vocab)
    tr.check_space_dims(ckpt.es, len(entity_vocab), len(relation_vocab))
    if args.filter == "train-only":
        flt = build_filter_index([train_triples])
    else:
        flt = build_filter_index([train_triples, *extra, eval_triples])
    report = ev.evaluate_split(ckpt.es, eval_triples, flt)
    text = ev.format_metrics_tsv(report, full_precision=args.full_precision)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


def _cmd_predict(args) -> int:
    entity_vocab, relation_vocab, train_triples, extra, ckpt = _load_eval_inputs(args)
    slots = {"head": args.head, "relation": args.relation, "tail": args.tail}
    unknown = [s for s, v in slots.items() if v == "?"]
    if len(unknown) != 1:
        raise GeokgeError(
            f"exactly one of --head/--relation/--tail must be '?', got {len(unknown)}"
        )
    slot = unknown[0]

    def resolve(vocab, name, what):
        if name == "?":
            return 0
        if name not in vocab:
            raise GeokgeError(f"unknown {what} {name!r}")
        return vocab.id(name)

    triple = Triple(
        resolve(entity_vocab, args.head, "entity"),
        resolve(relation_vocab, args.relation, "relation"),
        resolve(entity_vocab, args.tail, "entity"),
    )
    if args.filter == "train-only":
        flt = build_filter_index([train_triples])
    else:
        flt = build_filter_index([train_triples, *extra])
    vocab = relation_vocab if slot == "relation" else entity_vocab
    rows = ev.predict_topk(ckpt.es, triple, slot, flt, vocab, k=args.topk)
    text = ev.format_predictions_tsv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# parser wiring


def _add_vocab_flags(p) -> None:
    p.add_argument("--entities", help="entity vocabulary file (one name per line)")
    p.add_argument("--relations", help="relation vocabulary file (one name per line)")


def _add_filter_sources(p) -> None:
    p.add_argument("--train", required=True, help="train split triples")
    p.add_argument("--valid", help="validation split triples")
    p.add_argument("--test", help="test split triples")
    _add_vocab_flags(p)


def build_parser() -> _Parser:
    parser = _Parser(prog="geokge", description="geospatial KG embeddings")
    parser.add_argument("--version", action="version", version=f"geokge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic geospatial KG")
    p.add_argument("--out", required=True)
    p.add_argument("--entities", type=int, default=500)
    p.add_argument("--triples", type=int, default=3000)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--extent", type=float, default=1000.0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("split", help="deterministic train/valid/test split")
    p.add_argument("--triples", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ratio", type=_ratio, default=(87.0, 3.0, 10.0),
                   help="TRAIN:VALID:TEST percentages (default 87:3:10)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("build-features", help="extract pair features from geometries")
    p.add_argument("--triples", required=True)
    p.add_argument("--geoms", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dis-bins", type=int, default=20)
    p.add_argument("--lonlat", action="store_true",
                   help="treat coordinates as lon/lat degrees; project to meters first")
    _add_vocab_flags(p)
    p.set_defaults(func=_cmd_build_features)

    p = sub.add_parser("train", help="train embeddings")
    p.add_argument("--triples", required=True, help="train split triples")
    p.add_argument("--features", default="",
                   help="features file from build-features; empty disables alignment")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--k", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--neg-rate", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--align-weight", type=float)
    p.add_argument("--adv-temp", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--kinds", help="comma list of topo,dir,dis (default: all, with features)")
    p.add_argument("--verbose", action="store_true")
    _add_vocab_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="filtered link-prediction metrics")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--triples", required=True, help="evaluation split triples")
    _add_filter_sources(p)
    p.add_argument("--filter", choices=("all", "train-only"), default="all")
    p.add_argument("--out")
    p.add_argument("--full-precision", action="store_true")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("predict", help="rank candidates for a partial triple")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--head", required=True, help="entity name, or ? for the query slot")
    p.add_argument("--relation", required=True, help="relation name, or ?")
    p.add_argument("--tail", required=True, help="entity name, or ?")
    _add_filter_sources(p)
    p.add_argument("--filter", choices=("all", "train-only"), default="train-only")
    p.add_argument("--topk", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_predict)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GeokgeError, OSError) as exc:
        print(f"geokge: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
