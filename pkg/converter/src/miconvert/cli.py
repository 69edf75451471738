"""Command-line front end: ``miconvert convert`` and ``miconvert verify``.

Exit codes: 0 success, 1 I/O or integrity failure (including a FAIL
verdict from verify), 2 invalid arguments.
"""

from __future__ import annotations

import argparse
import sys

from .archives import ArchiveDescriptor, DATASETS
from .convert import convert, verify
from .errors import ConversionError, IntegrityError


def _int_list(text):
    return [int(part) for part in text.split(",") if part]


def cmd_convert(args) -> int:
    desc = ArchiveDescriptor(
        kind=args.kind, source=args.source,
        subjects=_int_list(args.subjects) if args.subjects else None,
        sessions=args.sessions.split(",") if args.sessions else None)
    summary = convert(desc, args.out)
    print(f"{summary['kind']}: {summary['recordings']} recordings from "
          f"{len(summary['subjects'])} subjects -> {args.out}")
    if summary["absent"]:
        print(f"absent subjects: {summary['absent']}")
    return 0


def cmd_verify(args) -> int:
    report = verify(args.dir)
    print(report.render())
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="miconvert",
        description="Convert public MI-EEG archives to canonical-raw MIRW")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="archive -> canonical-raw directory")
    p.add_argument("--kind", required=True, choices=sorted(DATASETS),
                   help="which archive the source directory holds")
    p.add_argument("--src", dest="source", required=True,
                   help="directory with the downloaded archive files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--subjects", default=None,
                   help="comma list of 1-based subject numbers (default all)")
    p.add_argument("--sessions", default=None,
                   help="comma list of session names (default all)")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("verify", help="check a converted directory")
    p.add_argument("--dir", required=True, help="canonical-raw directory")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConversionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, IntegrityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
