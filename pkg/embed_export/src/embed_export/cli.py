"""Command line for the vector exporter."""

import argparse
import sys

from .exporter import ExportError, TASKS, export_vectors


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embed-export", description="Encode a TSV corpus to a vector file.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_export = sub.add_parser("export", help="encode one corpus split")
    p_export.add_argument("--data", required=True, help="text<TAB>label corpus file")
    p_export.add_argument("--model", required=True, choices=["better", "faster"])
    p_export.add_argument("--out", required=True, help="vector file to write")
    p_export.add_argument("--task", choices=TASKS, default="three_way")
    p_export.add_argument("--normalized", action="store_true", help="lowercase and collapse whitespace before encoding")
    p_export.add_argument("--batch-size", type=int, default=64)
    return parser


def main(argv=None, encoder=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = export_vectors(
            args.data,
            args.model,
            args.out,
            encoder=encoder,
            task=args.task,
            normalized=args.normalized,
            batch_size=args.batch_size,
        )
    except (ExportError, OSError) as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}: {manifest.n_docs} rows, dim {manifest.dim} ({manifest.model_name})")
    print(f"manifest {args.out}.manifest.json sha256 {manifest.checksum}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
