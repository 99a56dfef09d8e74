#!/usr/bin/env python3
"""Sweep cell type x layer count across dataset variants.

For each requested variant this builds the corpus, runs the sweep grid,
and echoes the per-cell winners from best.csv.  Quick smoke pass:

    python3 scripts/layer_sweep.py --workdir runs/sweep --epochs 1 \
        --hidden-size 32 --embedding-dim 16
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
    ap.add_argument("--variants", default="control,interval,db12")
    ap.add_argument("--cells", default="lstm,ugrnn")
    ap.add_argument("--layers", default="1,2,3")
    ap.add_argument("--hidden-size", type=int, default=128)
    ap.add_argument("--embedding-dim", type=int, default=64)
    ap.add_argument("--batch-size", type=int, default=4)
    ap.add_argument("--seq-len", type=int, default=50)
    ap.add_argument("--epochs", type=int, default=None)
    ap.add_argument("--max-iterations", type=int, default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workdir", default="runs/sweep")
    args = ap.parse_args()

    work = Path(args.workdir)
    work.mkdir(parents=True, exist_ok=True)
    for variant in args.variants.split(","):
        corpus = work / f"corpus_{variant}.json"
        out_dir = work / variant
        step(["dataset", "--songs", args.songs, "--variant", variant,
              "--out", str(corpus)])
        sweep = ["sweep", "--corpus", str(corpus), "--out-dir", str(out_dir),
                 "--cells", args.cells, "--layers", args.layers,
                 "--hidden-size", str(args.hidden_size),
                 "--embedding-dim", str(args.embedding_dim),
                 "--batch-size", str(args.batch_size),
                 "--seq-len", str(args.seq_len), "--seed", str(args.seed)]
        if args.epochs is not None:
            sweep += ["--epochs", str(args.epochs)]
        if args.max_iterations is not None:
            sweep += ["--max-iterations", str(args.max_iterations)]
        step(sweep)
        print(f"[{variant}] " + "; ".join(
            (out_dir / "best.csv").read_text().splitlines()[1:]
        ))


if __name__ == "__main__":
    main()
