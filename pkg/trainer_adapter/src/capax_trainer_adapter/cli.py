"""Console entry points for the trainer adapter."""

from __future__ import annotations

import argparse
import logging
import sys

from .ingest import ingest_archive
from .protocol import AdapterConfig, serve


def trainer_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="PyTorch trainer speaking the capax wire protocol on stdio")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--dump-predictions", default=None,
                        help="directory for test-set truth/probability dumps")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr)
    config = AdapterConfig(device=args.device, batch_size=args.batch_size,
                           dump_predictions=args.dump_predictions)
    return serve(sys.stdin, sys.stdout, config)


def ingest_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Convert a DICOM archive into a capax inventory plus raw payloads")
    parser.add_argument("archive", help="directory with one subdirectory per patient")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--target", type=int, default=256, help="preprocessed image size")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr)
    patients = ingest_archive(args.archive, args.out, args.target)
    total = sum(p.slices * p.phases for p in patients)
    print(f"ingested {len(patients)} patients, {total} images -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(trainer_main())
