"""Command-line entry point: expwl1-convert --in source.pkl --out pairs.jsonl"""

import argparse
import pickle
import sys

from .convert import ConversionError, convert


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="expwl1-convert",
        description="Convert the pickled paired-graph benchmark to JSONL pair records.",
    )
    parser.add_argument("--in", dest="source", required=True, help="pickled source file")
    parser.add_argument("--out", dest="out", required=True, help="JSONL output path")
    parser.add_argument(
        "--partial",
        action="store_true",
        help="skip the published-statistics comparison (for partial extracts)",
    )
    args = parser.parse_args(argv)
    try:
        manifest = convert(args.source, args.out, expect_full_dataset=not args.partial)
    except (ConversionError, OSError, pickle.UnpicklingError, ModuleNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    sys.stdout.write(
        f"converted {manifest.graphs_converted} graphs into "
        f"{manifest.pairs_emitted} pairs -> {manifest.output}\n"
        f"sha256 {manifest.checksum}\n"
    )
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
