"""Command line entry points: convert one archive, verify one output dir."""

import argparse
import sys

from .core import ConvertError, convert_subject, verify


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wesad-convert", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert a subject archive")
    p.add_argument("--in", dest="archive", required=True,
                   help="per-subject pickle archive")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("verify", help="verify a converted directory")
    p.add_argument("--dir", required=True)

    args = parser.parse_args(argv)
    if args.command == "convert":
        try:
            manifest = convert_subject(args.archive, args.out)
        except ConvertError as e:
            print(f"error: {e}", file=sys.stderr)
            return 1
        n = sum(c["n_samples"] for c in manifest["channels"])
        print(
            f"subject {manifest['subject_id']}: {len(manifest['channels'])} "
            f"channels, {n} samples, labels {manifest['label']['n_samples']}"
        )
        return 0

    report = verify(args.dir)
    for line in report.lines():
        print(line)
    if not report.ok:
        print(f"{len(report.failures)} check(s) failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
