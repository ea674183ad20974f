"""Command-line entry point.

Subcommands:

    train      corpus -> model file
    generate   model + scheme -> dataset (JSONL)
    detect     dataset + scheme -> scores CSV
    collide    config -> full collision matrix, CSVs, plots, summary
    report     emitted CSVs -> TPR bars + findings summary

Every subcommand exits 0 on success; failures print a diagnostic naming
the failing stage and exit 1 (argparse usage errors exit 2).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import load_config, save_config
from .dataset import Dataset, generate_slice, load_dataset, save_dataset
from .detect import score, write_scores_csv
from .errors import WmCollideError
from .harness import emit_report, run_collision_matrix
from .pipeline import prompt_pool
from .toylm import DEFAULT_ALPHA, ingest_corpus, load_model, save_model, train_lm
from .watermark import make_scheme


def _add_scheme_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kind", choices=["kgw", "prw", "sir", "none"], default="kgw")
    parser.add_argument("--strength", choices=["weak", "strong"], default="strong")
    parser.add_argument("--key", type=int, default=2024)
    parser.add_argument("--gamma", type=float, default=None,
                        help="green fraction (default 0.25, or 0.5 for sir)")
    parser.add_argument("--delta", type=float, default=None,
                        help="logit shift (default 2 weak / 5 strong)")
    parser.add_argument("--seeding", choices=["prev_token", "self_hash"], default="self_hash")
    parser.add_argument("--chunk-length", type=int, default=10)


def _scheme_from_flags(args):
    if args.kind == "none":
        return None
    return make_scheme(
        args.kind, args.strength, args.key,
        gamma=args.gamma, delta=args.delta,
        seeding=args.seeding, chunk_length=args.chunk_length,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wmcollide",
        description="Desk-scale laboratory for watermark collision experiments.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an n-gram model from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--max-vocab", type=int, default=5000)

    p = sub.add_parser("generate", help="generate a dataset slice with one scheme")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True, help="corpus file supplying prompts")
    p.add_argument("--out", required=True, help="dataset JSONL path")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--max-new-tokens", type=int, default=128)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--z-min", type=float, default=None,
                   help="keep only samples whose own-detector statistic reaches this")
    _add_scheme_flags(p)

    p = sub.add_parser("detect", help="score a dataset against one scheme")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="scores CSV path")
    p.add_argument("--scheme-id", default=None,
                   help="scheme id from the dataset header (default: its only scheme)")

    p = sub.add_parser("collide", help="run the full collision matrix")
    p.add_argument("--config", required=True, help="experiment TOML file")
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--out", default=None, help="override output directory")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("report", help="rebuild plots and summary from emitted CSVs")
    p.add_argument("--in", dest="in_dir", required=True, help="directory with emitted CSVs")
    p.add_argument("--out", default=None, help="output directory (default: in place)")
    return parser


def _cmd_train(args) -> int:
    vocab = ingest_corpus(args.corpus, args.max_vocab)
    model = train_lm(args.corpus, vocab, args.order, args.alpha)
    save_model(model, args.out)
    print(f"trained order-{args.order} model over {vocab.size} tokens -> {args.out}")
    return 0


def _cmd_generate(args) -> int:
    lm = load_model(args.model)
    pool = prompt_pool(args.corpus, lm)
    scheme = _scheme_from_flags(args)
    ds = Dataset(vocab_size=lm.vocab.size)
    ds.add_scheme(scheme)
    prefix = "gen" if scheme is None else f"gen/{scheme.scheme_id}"
    ds.extend(
        generate_slice(
            lm, scheme, pool, args.n,
            master_seed=args.seed, salt=prefix, id_prefix=prefix,
            max_new_tokens=args.max_new_tokens, temperature=args.temperature,
            min_tokens=2, z_min=args.z_min,
        )
    )
    save_dataset(ds, args.out)
    print(f"wrote {len(ds.samples)} samples -> {args.out}")
    return 0


def _cmd_detect(args) -> int:
    ds = load_dataset(args.dataset)
    if args.scheme_id is None:
        if len(ds.schemes) != 1:
            raise WmCollideError(
                f"dataset has {len(ds.schemes)} schemes; pass --scheme-id "
                f"(one of {sorted(ds.schemes)})"
            )
        scheme = next(iter(ds.schemes.values()))
    else:
        if args.scheme_id not in ds.schemes:
            raise WmCollideError(
                f"scheme {args.scheme_id!r} not in dataset (have {sorted(ds.schemes)})"
            )
        scheme = ds.schemes[args.scheme_id]
    rows = [(s.sample_id or "", score(s, scheme, ds.vocab_size)) for s in ds.samples]
    write_scores_csv(args.out, rows)
    print(f"scored {len(rows)} samples with {scheme.scheme_id} -> {args.out}")
    return 0


def _cmd_collide(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.master_seed = args.seed
    if args.out is not None:
        config.out_dir = args.out
    out_dir = config.resolved_out_dir()
    report = run_collision_matrix(config)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_config(config, out_dir / "config.toml")
    if report.dataset is not None:
        save_dataset(report.dataset, out_dir / "dataset.jsonl")
    written = emit_report(report, out_dir, plots=config.plots and not args.no_plots)
    print(f"collision matrix complete: {len(report.cells)} cells -> {out_dir}")
    for path in written:
        print(f"  {path}")
    return 0


def _cmd_report(args) -> int:
    from .report_io import report_from_csv

    in_dir = Path(args.in_dir)
    out_dir = Path(args.out) if args.out else in_dir
    report = report_from_csv(in_dir)
    written = emit_report(report, out_dir, plots=True)
    print(f"rebuilt report -> {out_dir}")
    for path in written:
        print(f"  {path}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "generate": _cmd_generate,
    "detect": _cmd_detect,
    "collide": _cmd_collide,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except (WmCollideError, OSError, RuntimeError, ValueError) as exc:
        print(f"error in stage '{args.command}': {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
