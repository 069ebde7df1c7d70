"""Batch command line: analyze trial files, generate synthetic datasets, validate input.

Exit codes: 0 success, 1 parse error, 2 config error.
"""

import argparse
import dataclasses
import json
import os
import sys

from .config import PipelineConfig, load_config
from .errors import ConfigError, ParseError
from .io import ingest, write_reports, write_trials_csv
from .pipeline import run
from .synth import SynthSpec, make_mixture_dataset

_SYNTH_EXTRA_KEYS = ("mixture", "case2_fraction", "hyperbola_fraction", "n", "seed")


def _parse_synth_spec(text):
    """Flat key-value synth spec: SynthSpec fields plus mixture controls."""
    fields = {f.name: f for f in dataclasses.fields(SynthSpec)}
    overrides = {}
    extras = {"mixture": (("conic", 0.6), ("dmj", 0.35), ("mj", 0.05)),
              "case2_fraction": 0.26, "hyperbola_fraction": 0.5}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key == "mixture":
            pairs = []
            for piece in value.split(","):
                kind, _, weight = piece.partition(":")
                pairs.append((kind.strip(), float(weight)))
            extras["mixture"] = tuple(pairs)
        elif key in ("case2_fraction", "hyperbola_fraction"):
            extras[key] = float(value)
        elif key in fields:
            current = getattr(SynthSpec(), key)
            if isinstance(current, tuple):
                overrides[key] = tuple(float(x) for x in value.split(","))
            elif isinstance(current, float):
                overrides[key] = float(value)
            elif isinstance(current, int):
                overrides[key] = int(value)
            else:
                overrides[key] = value
        else:
            raise ConfigError(f"line {lineno}: unknown synth key {key!r}")
    return SynthSpec(**overrides), extras


def _cmd_analyze(args):
    config = load_config(args.config) if args.config else PipelineConfig()
    if args.jobs is not None:
        config = dataclasses.replace(config, jobs=args.jobs)
    result = run(args.input, config)
    written = write_reports(result, args.out, format=args.format)
    for path in written:
        print(path)
    print(
        f"analyzed {len(result.reports)} trials, "
        f"excluded {len(result.exclusions)}"
    )
    return 0


def _cmd_synth(args):
    if args.spec:
        with open(args.spec, "r", encoding="utf-8") as fh:
            base, extras = _parse_synth_spec(fh.read())
    else:
        base, extras = SynthSpec(), {
            "mixture": (("conic", 0.6), ("dmj", 0.35), ("mj", 0.05)),
            "case2_fraction": 0.26,
            "hyperbola_fraction": 0.5,
        }
    pairs = make_mixture_dataset(
        args.n,
        mixture=extras["mixture"],
        case2_fraction=extras["case2_fraction"],
        hyperbola_fraction=extras["hyperbola_fraction"],
        noise_mm=base.noise_mm,
        seed=args.seed,
        base=base,
    )
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "trials.csv")
    write_trials_csv([trial for trial, _ in pairs], csv_path)
    truth_path = os.path.join(args.out, "ground_truth.json")
    records = [
        {
            "trial_id": truth.trial_id,
            "kind": truth.spec.kind,
            "conic_family": truth.spec.conic_family,
            "case": truth.case.value,
            "t_ogc": truth.t_ogc,
            "t_start": truth.t_start,
            "t_rgc": truth.t_rgc,
            "dmj_ratio": truth.dmj_ratio,
            "noise_mm": truth.spec.noise_mm,
            "seed": truth.spec.seed,
        }
        for _, truth in pairs
    ]
    with open(truth_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(records, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(csv_path)
    print(truth_path)
    return 0


def _cmd_validate(args):
    trials, exclusions = ingest(args.input, args.format)
    for trial in trials:
        print(f"OK {trial.trial_id} ({len(trial.object)} samples)")
    for exc in exclusions:
        print(f"EXCLUDED {exc['trial_id']}: {exc['reason']}")
    print(f"{len(trials)} valid, {len(exclusions)} excluded")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="reachfit",
        description="Segment handover reaches and compare motion-model fits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_an = sub.add_parser("analyze", help="run the full pipeline on a trial file")
    p_an.add_argument("--input", required=True)
    p_an.add_argument("--config", default=None)
    p_an.add_argument("--out", required=True)
    p_an.add_argument("--format", choices=("json", "csv", "md"), default="json")
    p_an.add_argument("--jobs", type=int, default=None)
    p_an.set_defaults(func=_cmd_analyze)

    p_sy = sub.add_parser("synth", help="generate a synthetic dataset")
    p_sy.add_argument("--spec", default=None)
    p_sy.add_argument("--n", type=int, required=True)
    p_sy.add_argument("--out", required=True)
    p_sy.add_argument("--seed", type=int, default=0)
    p_sy.set_defaults(func=_cmd_synth)

    p_va = sub.add_parser("validate", help="check a trial file without analyzing")
    p_va.add_argument("--input", required=True)
    p_va.add_argument("--format", default="canonical-csv")
    p_va.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
