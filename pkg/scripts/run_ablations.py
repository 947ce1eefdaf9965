#!/usr/bin/env python3
"""Run the augmentation/reweighting ablation grid on a synthetic corpus.

Seven conditions — {baseline, token substitution, mixup} crossed with
meta-reweighting off/on, plus the combined method — each driven by its own
generated config file under <out>/configs/. Results land in
<out>/ablation_results.json and are printed as a table.

Usage:
    python3 scripts/run_ablations.py --out runs/ablation
"""

import argparse
import json
from pathlib import Path

from metaner.cli import main as metaner_main
from metaner.synthetic import write_synthetic_dataset

# (condition name, method key, meta-reweighting on?)
CONDITIONS = [
    ("baseline", "baseline", False),
    ("baseline+mr", "baseline", True),
    ("ts", "ts", False),
    ("ts+mr", "ts", True),
    ("mixup", "mixup", False),
    ("mixup+mr", "mixup", True),
    ("both+mr", "both", True),
]


def run_grid(
    out_dir: str | Path,
    *,
    train_size: int = 400,
    dev_size: int = 50,
    test_size: int = 50,
    dim: int = 12,
    fraction: float = 0.05,
    steps: int = 200,
    batch: int = 8,
    meta_batch: int = 8,
    hidden: int = 16,
    times: int = 1,
    seed: int = 0,
) -> dict[str, dict]:
    """Run every condition end-to-end; return {condition: summary dict}."""
    out_dir = Path(out_dir)
    paths = write_synthetic_dataset(
        out_dir / "data", train=train_size, dev=dev_size, test=test_size,
        seed=seed, dim=dim,
    )
    config_dir = out_dir / "configs"
    config_dir.mkdir(parents=True, exist_ok=True)

    results: dict[str, dict] = {}
    for name, method, meta_reweight in CONDITIONS:
        run_dir = out_dir / "runs" / name
        lines = [
            f"train={paths['train']}",
            f"dev={paths['dev']}",
            f"test={paths['test']}",
            f"vectors={paths['vectors']}",
            f"stopwords={paths['stopwords']}",
            f"out={run_dir}",
            f"fraction={fraction}",
            f"method={method}",
            f"seed={seed}",
            f"model.emb_dim={dim}",
            f"model.hidden={hidden}",
            f"steps={steps}",
            f"batch={batch}",
            f"meta_batch={meta_batch}",
            f"times={times}",
            f"meta_reweight={'true' if meta_reweight else 'false'}",
        ]
        config_path = config_dir / f"{name}.cfg"
        config_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        rc = metaner_main(["train", "--config", str(config_path)])
        if rc != 0:
            raise RuntimeError(f"condition {name} failed with exit code {rc}")
        results[name] = json.loads((run_dir / "summary.json").read_text())

    (out_dir / "ablation_results.json").write_text(
        json.dumps(results, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return results


def print_table(results: dict[str, dict]) -> None:
    header = f"{'condition':<14}{'method':<10}{'MR':<6}{'dev F1':>8}{'test F1':>9}"
    print(header)
    print("-" * len(header))
    for name, method, meta_reweight in CONDITIONS:
        if name not in results:
            continue
        summary = results[name]
        dev_f1 = summary["dev"]["f1"]
        test_f1 = summary.get("test", {}).get("f1", float("nan"))
        mr = "on" if meta_reweight else "off"
        print(f"{name:<14}{method:<10}{mr:<6}{dev_f1:>8.4f}{test_f1:>9.4f}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--train-size", type=int, default=400)
    ap.add_argument("--fraction", type=float, default=0.05,
                    help="subsample rate applied to the training split")
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--batch", type=int, default=8)
    ap.add_argument("--meta-batch", type=int, default=8)
    ap.add_argument("--hidden", type=int, default=16)
    ap.add_argument("--times", type=int, default=1,
                    help="pseudo examples generated per training sentence")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    results = run_grid(
        args.out,
        train_size=args.train_size,
        fraction=args.fraction,
        steps=args.steps,
        batch=args.batch,
        meta_batch=args.meta_batch,
        hidden=args.hidden,
        times=args.times,
        seed=args.seed,
    )
    print_table(results)
    print(f"\nfull metrics: {Path(args.out) / 'ablation_results.json'}")


if __name__ == "__main__":
    main()
