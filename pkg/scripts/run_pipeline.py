#!/usr/bin/env python3
"""Run the full dataset -> train -> sample -> eval pipeline in one go.

Defaults reproduce a quick end-to-end pass on the bundled corpus:

    python3 scripts/run_pipeline.py --workdir runs/quick --max-iterations 50

Drop --max-iterations for a real training run (minutes to hours depending
on the variant and model size).
"""

import argparse
import sys
from pathlib import Path

from melodykit.cli import main as cli

ROOT = Path(__file__).resolve().parent.parent


def step(argv):
    print("$ melodykit " + " ".join(argv))
    code = cli(argv)
    if code != 0:
        sys.exit(code)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--songs", default=str(ROOT / "data" / "mini_corpus.jsonl"))
    ap.add_argument("--variant", default="control", choices=["control", "interval", "db12"])
    ap.add_argument("--cell", default="lstm")
    ap.add_argument("--num-layers", type=int, default=1)
    ap.add_argument("--hidden-size", type=int, default=128)
    ap.add_argument("--embedding-dim", type=int, default=64)
    ap.add_argument("--batch-size", type=int, default=4)
    ap.add_argument("--seq-len", type=int, default=50)
    ap.add_argument("--epochs", type=int, default=None)
    ap.add_argument("--max-iterations", type=int, default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workdir", default="runs/pipeline")
    args = ap.parse_args()

    work = Path(args.workdir)
    work.mkdir(parents=True, exist_ok=True)
    corpus = work / f"corpus_{args.variant}.json"
    ckpt = work / "model.ckpt"

    step(["dataset", "--songs", args.songs, "--variant", args.variant,
          "--out", str(corpus)])
    train = ["train", "--corpus", str(corpus), "--checkpoint", str(ckpt),
             "--curve", str(work / "curve.csv"),
             "--cell", args.cell, "--num-layers", str(args.num_layers),
             "--hidden-size", str(args.hidden_size),
             "--embedding-dim", str(args.embedding_dim),
             "--batch-size", str(args.batch_size), "--seq-len", str(args.seq_len),
             "--seed", str(args.seed)]
    if args.epochs is not None:
        train += ["--epochs", str(args.epochs)]
    if args.max_iterations is not None:
        train += ["--max-iterations", str(args.max_iterations)]
    step(train)
    step(["sample", "--checkpoint", str(ckpt), "--out-dir", str(work / "samples"),
          "--seed", str(args.seed)])
    step(["eval", "--songs", str(work / "samples" / "songs.jsonl"),
          "--out-dir", str(work / "report")])
    print(f"done; artifacts under {work}/")


if __name__ == "__main__":
    main()
