"""Command-line pipeline: dataset, train, sweep, sample, eval.

Every command exits 0 on success and nonzero with a one-line JSON error
object on stderr otherwise.  Path flags fall back to MELODYKIT_* env vars
(paths only, never numeric settings).  Given identical inputs, flags, and
seeds, each command writes byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import core, metrics, midi, rnn
from .core import DatasetVariant, Song, TrainingCorpus, Vocabulary
from .errors import MelodyKitError

DEFAULT_SEED_SONG = [60, 62, 64, 62]
DEFAULT_EPOCHS = {DatasetVariant.CONTROL: 300, DatasetVariant.INTERVAL: 300, DatasetVariant.DB12: 50}


def _env_path(name: str) -> str | None:
    return os.environ.get(f"MELODYKIT_{name}")


def _require(value, flag: str, env: str):
    if value is None:
        raise ValueError(f"{flag} is required (or set MELODYKIT_{env})")
    return value


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise ValueError(f"{flag} expects comma-separated integers, got {text!r}") from None


def _write_corpus(corpus: TrainingCorpus, out: Path) -> Path:
    payload = {
        "variant": corpus.variant.value,
        "x": corpus.x.tolist(),
        "y": corpus.y.tolist(),
    }
    out.write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")
    sidecar = out.with_name(out.stem + ".vocab.json")
    sidecar.write_text(
        json.dumps({"variant": corpus.variant.value, "tokens": list(corpus.vocabulary.tokens)},
                   sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return sidecar


def _read_corpus(path: Path) -> TrainingCorpus:
    payload = json.loads(path.read_text(encoding="utf-8"))
    sidecar = path.with_name(path.stem + ".vocab.json")
    if not sidecar.exists():
        raise ValueError(f"vocabulary sidecar {sidecar} not found next to {path}")
    vocab_payload = json.loads(sidecar.read_text(encoding="utf-8"))
    return TrainingCorpus(
        x=np.asarray(payload["x"], dtype=np.int64),
        y=np.asarray(payload["y"], dtype=np.int64),
        vocabulary=Vocabulary(tokens=tuple(int(t) for t in vocab_payload["tokens"])),
        variant=DatasetVariant(payload["variant"]),
    )


def _load_input_songs(songs_path: str | None, midi_dir: str | None) -> list[Song]:
    if (songs_path is None) == (midi_dir is None):
        raise ValueError("pass exactly one of --songs or --midi-dir")
    if songs_path is not None:
        return core.load_songs_jsonl(songs_path)
    paths = sorted(p for p in Path(midi_dir).iterdir() if p.suffix.lower() in (".mid", ".midi"))
    if not paths:
        raise ValueError(f"no .mid or .midi files in {midi_dir}")
    return [midi.parse_midi(p.read_bytes()) for p in paths]


def cmd_dataset(args: argparse.Namespace) -> int:
    out = Path(_require(args.out, "--out", "OUT"))
    variant = DatasetVariant(args.variant)
    raw = _load_input_songs(args.songs, args.midi_dir)
    kept = core.clean_corpus(raw)
    corpus = core.build_corpus(kept, variant)
    sidecar = _write_corpus(corpus, out)
    print(f"songs: {len(kept)} kept, {len(raw) - len(kept)} dropped")
    print(f"tokens: {corpus.x.size + 1} ({variant.value}), vocabulary: {corpus.vocabulary.size}")
    print(f"wrote {out} and {sidecar}")
    return 0


def _train_config(args: argparse.Namespace, variant: DatasetVariant) -> rnn.TrainConfig:
    epochs = args.epochs if args.epochs is not None else DEFAULT_EPOCHS[variant]
    return rnn.TrainConfig(
        cell=args.cell,
        num_layers=args.num_layers,
        hidden_size=args.hidden_size,
        embedding_dim=args.embedding_dim,
        batch_size=args.batch_size,
        seq_len=args.seq_len,
        epochs=epochs,
        learning_rate=args.learning_rate,
        lr_decay=args.lr_decay,
        clip_norm=args.clip_norm,
        max_iterations=args.max_iterations,
    )


def _write_curve(curve: rnn.LearningCurve, path: Path) -> None:
    lines = ["iteration,loss"]
    lines += [f"{i},{loss!r}" for i, loss in curve]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_train(args: argparse.Namespace) -> int:
    corpus = _read_corpus(Path(_require(args.corpus, "--corpus", "CORPUS")))
    checkpoint = Path(_require(args.checkpoint, "--checkpoint", "CHECKPOINT"))
    config = _train_config(args, corpus.variant)
    model, curve = rnn.train(corpus, config, seed=args.seed)
    rnn.save_checkpoint(model, checkpoint)
    print(f"trained {config.cell} x{config.num_layers} for {len(curve)} iterations")
    if curve:
        print(f"loss: {curve[0][1]:.4f} -> {curve[-1][1]:.4f}")
    if args.curve is not None:
        _write_curve(curve, Path(args.curve))
        print(f"wrote {args.curve}")
    print(f"wrote {checkpoint}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    corpus = _read_corpus(Path(_require(args.corpus, "--corpus", "CORPUS")))
    out_dir = Path(_require(args.out_dir, "--out-dir", "OUT_DIR"))
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = [c.strip() for c in args.cells.split(",") if c.strip()]
    layer_counts = _parse_int_list(args.layers, "--layers")
    rows: list[dict] = []
    for cell in cells:
        for num_layers in layer_counts:
            row = {"cell": cell, "layers": num_layers}
            try:
                config = _train_config(args, corpus.variant)
                config.cell = cell
                config.num_layers = num_layers
                _, curve = rnn.train(corpus, config, seed=args.seed)
                _write_curve(curve, out_dir / f"curve_{cell}_{num_layers}.csv")
                row["initial_loss"] = curve[0][1] if curve else float("nan")
                row["final_loss"] = curve[-1][1] if curve else float("nan")
                row["status"] = "ok"
            except (MelodyKitError, ValueError) as exc:
                # One bad run must not kill the sweep.
                row["initial_loss"] = float("nan")
                row["final_loss"] = float("nan")
                row["status"] = f"error:{type(exc).__name__}"
            rows.append(row)
            print(f"{row['cell']:6s} layers={row['layers']}  "
                  f"final={row['final_loss']}  [{row['status']}]")

    lines = ["cell,layers,initial_loss,final_loss,status"]
    lines += [
        f"{r['cell']},{r['layers']},{r['initial_loss']!r},{r['final_loss']!r},{r['status']}"
        for r in rows
    ]
    (out_dir / "summary.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    best_lines = ["cell,best_layers,final_loss"]
    for cell in cells:
        ok = [r for r in rows if r["cell"] == cell and r["status"] == "ok"]
        if ok:
            best = min(ok, key=lambda r: r["final_loss"])
            best_lines.append(f"{cell},{best['layers']},{best['final_loss']!r}")
            print(f"best for {cell}: {best['layers']} layers (final {best['final_loss']:.4f})")
    (out_dir / "best.csv").write_text("\n".join(best_lines) + "\n", encoding="utf-8")
    print(f"wrote {out_dir / 'summary.csv'} and {out_dir / 'best.csv'}")
    return 0


def _sample_songs(model: rnn.ModelState, args: argparse.Namespace) -> list[Song]:
    seed_song = [int(s) for s in str(args.seed_song).split(",")]
    songs = []
    for i in range(args.count):
        rng = np.random.default_rng([args.seed, i])
        songs.append(
            rnn.sample(model, seed_song, args.notes, mode=args.mode,
                       temperature=args.temperature, rng=rng)
        )
    return songs


def _write_song_files(songs: list[Song], out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    core.save_songs_jsonl(songs, out_dir / "songs.jsonl")
    for i, song in enumerate(songs):
        (out_dir / f"song_{i:03d}.mid").write_bytes(midi.write_midi(song))


def cmd_sample(args: argparse.Namespace) -> int:
    model = rnn.load_checkpoint(_require(args.checkpoint, "--checkpoint", "CHECKPOINT"))
    out_dir = Path(_require(args.out_dir, "--out-dir", "OUT_DIR"))
    songs = _sample_songs(model, args)
    _write_song_files(songs, out_dir)
    print(f"wrote {len(songs)} songs ({len(songs[0]) if songs else 0} notes each) to {out_dir}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    out_dir = Path(_require(args.out_dir, "--out-dir", "OUT_DIR"))
    out_dir.mkdir(parents=True, exist_ok=True)
    if (args.songs is None) == (args.checkpoint is None):
        raise ValueError("pass exactly one of --songs or --checkpoint")
    if args.songs is not None:
        songs = core.load_songs_jsonl(args.songs)
    else:
        model = rnn.load_checkpoint(args.checkpoint)
        songs = _sample_songs(model, args)
        core.save_songs_jsonl(songs, out_dir / "songs.jsonl")

    cfg = metrics.SpanConfig(n=args.span_n, lb=args.span_lb, ub=args.span_ub)
    reports = []
    for i, song in enumerate(songs):
        try:
            reports.append(metrics.evaluate_song(song, cfg))
        except MelodyKitError as exc:
            raise type(exc)(f"song {i}: {exc}") from exc
    stats = metrics.stats_of_reports(reports)
    rep_index = metrics.representative_song(reports, stats.centroid())

    with open(out_dir / "reports.jsonl", "w", encoding="utf-8") as fh:
        for r in reports:
            fh.write(json.dumps(r.as_dict(), sort_keys=True) + "\n")
    stats_payload = {
        "count": stats.count,
        "cmm": {"mean": stats.cmm_mean, "std": stats.cmm_std},
        "lm": {"mean": stats.lm_mean, "std": stats.lm_std},
        "centr": {"mean": stats.centr_mean, "std": stats.centr_std},
        "representative_index": rep_index,
    }
    (out_dir / "stats.json").write_text(json.dumps(stats_payload, sort_keys=True) + "\n", encoding="utf-8")
    csv_lines = [
        "metric,mean,std",
        f"cmm,{stats.cmm_mean!r},{stats.cmm_std!r}",
        f"lm,{stats.lm_mean!r},{stats.lm_std!r}",
        f"centr,{stats.centr_mean!r},{stats.centr_std!r}",
    ]
    (out_dir / "stats.csv").write_text("\n".join(csv_lines) + "\n", encoding="utf-8")
    (out_dir / "representative.mid").write_bytes(midi.write_midi(songs[rep_index]))

    print(f"songs: {stats.count}")
    print(f"cmm:   {stats.cmm_mean:.4f} +- {stats.cmm_std:.4f}")
    print(f"lm:    {stats.lm_mean:.4f} +- {stats.lm_std:.4f}")
    print(f"centr: {stats.centr_mean:.4f} +- {stats.centr_std:.4f}")
    print(f"representative: song {rep_index} -> {out_dir / 'representative.mid'}")
    return 0


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cell", default="lstm", choices=sorted(rnn.CELL_TYPES))
    p.add_argument("--num-layers", type=int, default=1)
    p.add_argument("--hidden-size", type=int, default=128)
    p.add_argument("--embedding-dim", type=int, default=64)
    p.add_argument("--batch-size", type=int, default=50)
    p.add_argument("--seq-len", type=int, default=50)
    p.add_argument("--epochs", type=int, default=None,
                   help="default 300, or 50 for db12 corpora")
    p.add_argument("--learning-rate", type=float, default=0.002)
    p.add_argument("--lr-decay", type=float, default=0.97)
    p.add_argument("--clip-norm", type=float, default=5.0)
    p.add_argument("--max-iterations", type=int, default=None)


def _add_sampling_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed-song", default=",".join(str(n) for n in DEFAULT_SEED_SONG))
    p.add_argument("--notes", type=int, default=30)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--temperature", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="melodykit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dataset", help="transform songs into a token corpus")
    p.add_argument("--songs", default=_env_path("SONGS"), help="JSON Lines song file")
    p.add_argument("--midi-dir", default=_env_path("MIDI_DIR"), help="directory of .mid files")
    p.add_argument("--variant", default="control", choices=[v.value for v in DatasetVariant])
    p.add_argument("--out", default=_env_path("OUT"), help="corpus JSON output path")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="train one model on a corpus")
    p.add_argument("--corpus", default=_env_path("CORPUS"))
    p.add_argument("--checkpoint", default=_env_path("CHECKPOINT"))
    p.add_argument("--curve", default=_env_path("CURVE"), help="learning-curve CSV path")
    _add_model_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="train a grid of cells x layer counts")
    p.add_argument("--corpus", default=_env_path("CORPUS"))
    p.add_argument("--out-dir", default=_env_path("OUT_DIR"))
    p.add_argument("--cells", default="lstm,ugrnn", help="comma-separated cell kinds")
    p.add_argument("--layers", default="1,2,3", help="comma-separated layer counts")
    _add_model_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("sample", help="generate songs from a checkpoint")
    p.add_argument("--checkpoint", default=_env_path("CHECKPOINT"))
    p.add_argument("--out-dir", default=_env_path("OUT_DIR"))
    p.add_argument("--mode", default="greedy", choices=["greedy", "temperature"])
    _add_sampling_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="score songs (or a checkpoint's samples)")
    p.add_argument("--songs", default=_env_path("SONGS"), help="JSON Lines song file to score")
    p.add_argument("--checkpoint", default=_env_path("CHECKPOINT"),
                   help="sample from this checkpoint, then score")
    p.add_argument("--out-dir", default=_env_path("OUT_DIR"))
    p.add_argument("--mode", default="temperature", choices=["greedy", "temperature"])
    _add_sampling_flags(p)
    p.add_argument("--span-n", type=int, default=12)
    p.add_argument("--span-lb", type=int, default=5)
    p.add_argument("--span-ub", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MelodyKitError, ValueError, OSError) as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(payload), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
