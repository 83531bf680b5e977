"""featx command line: images + labels -> MCHF/MCHR/MCHL files."""

from __future__ import annotations

import argparse
import logging
import sys

from featx.extract import extract


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="featx",
        description="extract whole-image and five-crop region features",
    )
    ap.add_argument("--images", required=True, help="directory of images")
    ap.add_argument(
        "--labels", required=True,
        help="text file: filename<TAB>label1,label2,...",
    )
    ap.add_argument("--sigma", type=float, default=0.5, help="crop side ratio")
    ap.add_argument("--out", required=True, help="output prefix")
    ap.add_argument("--weights", help="optional backbone state-dict path")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    logging.basicConfig(level=logging.INFO, stream=sys.stderr)
    try:
        info = extract(
            args.images, args.labels, args.sigma, args.out,
            weights=args.weights, seed=args.seed,
        )
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"extracted {info['items']} items (skipped {info['skipped']}), "
        f"dim {info['dim']}, {len(info['classes'])} classes",
        file=sys.stderr,
    )
    for path in info["files"]:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
