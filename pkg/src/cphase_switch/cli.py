"""Command-line entry point: ``cphase-switch {fig3,fig4,validate,calibrate}``.

Every flag can also come from the environment as ``CPHASE_<FLAG>``
(``CPHASE_DESCRIPTOR``, ``CPHASE_SEED``, ``CPHASE_OUT``, ``CPHASE_WORKERS``,
``CPHASE_FORMAT``, ``CPHASE_PRESET``).  Flags win over the environment,
which wins over the descriptor file.

Phase differences are reported as the lag of the coincidence fringe behind
the Det. 1 singles fringe: positive means the coincidences peak later in
reference delay.  Sweep plots fold values into [0, 360).

Exit codes: 0 all outputs produced and unflagged, 1 flagged results or a
failed validation check, 2 bad input.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import experiment
from .experiment import DescriptorError, ExperimentDescriptor

ENV_PREFIX = "CPHASE_"


def _env(name: str):
    return os.environ.get(ENV_PREFIX + name.upper())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--descriptor", type=Path, help="experiment descriptor (INI format)")
    common.add_argument("--preset", choices=["small", "large"], help="preset used when no descriptor is given")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--workers", type=int, help="sweep worker threads")
    common.add_argument("--format", choices=["csv", "json"], dest="fmt", help="format of tabular outputs")

    p = argparse.ArgumentParser(prog="cphase-switch", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("fig3", parents=[common], help="single phase-shifted fringe scan")
    sub.add_parser("fig4", parents=[common], help="phase shift versus pump phase sweep")
    v = sub.add_parser("validate", parents=[common], help="oracle and invariant checks")
    v.add_argument("--cutoff", type=int, default=3, help="Fock cutoff for the oracle grid")
    sub.add_parser("calibrate", parents=[common], help="print calibrated amplitudes")
    return p


def resolve(args) -> tuple[ExperimentDescriptor, int]:
    descriptor = args.descriptor or (Path(_env("descriptor")) if _env("descriptor") else None)
    if descriptor is not None:
        desc = experiment.load_descriptor(descriptor)
    else:
        desc = ExperimentDescriptor.from_preset(args.preset or _env("preset") or "large")
    seed = args.seed if args.seed is not None else _env("seed")
    out = args.out or _env("out")
    fmt = args.fmt or _env("fmt") or _env("format")
    workers = args.workers if args.workers is not None else _env("workers")
    try:
        if seed is not None:
            desc = replace(desc, seed=int(seed))
        if out is not None:
            desc = replace(desc, output_dir=Path(out))
        if fmt is not None:
            if fmt not in ("csv", "json"):
                raise DescriptorError(f"format must be csv or json, got {fmt!r}")
            desc = replace(desc, fmt=fmt)
        workers = 1 if workers is None else int(workers)
    except ValueError as exc:
        raise DescriptorError(f"bad override: {exc}") from exc
    if workers < 1:
        raise DescriptorError("workers must be at least 1")
    return desc, workers


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        desc, workers = resolve(args)
        if args.command == "fig3":
            res = experiment.run_fig3(desc)
        elif args.command == "fig4":
            res = experiment.run_fig4(desc, workers=workers)
        elif args.command == "validate":
            report = experiment.run_validate(cutoff=args.cutoff, seed=desc.seed)
            print(json.dumps(report, indent=2))
            return 0 if report["passed"] else 1
        else:
            print(json.dumps(experiment.calibration_report(desc), indent=2))
            return 0
    except (DescriptorError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for f in res.files:
        print(f)
    print(json.dumps(experiment._clean(res.summary), indent=2))
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main())
