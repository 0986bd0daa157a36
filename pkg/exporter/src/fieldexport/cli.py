from __future__ import annotations

import argparse
import sys

from .export import ExportError, export
from .manifest import ManifestError, load_manifest


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "export":   # allow `fieldexport export --manifest ...`
        argv = argv[1:]
    parser = argparse.ArgumentParser(
        prog="fieldexport",
        description="Convert a torch checkpoint into the exactmesh interchange JSON")
    parser.add_argument("--manifest", required=True, help="YAML manifest path")
    parser.add_argument("--out", default=None, help="output JSON (overrides manifest)")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        manifest = load_manifest(args.manifest)
        path = export(manifest, out_path=args.out)
    except (ManifestError, ExportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
