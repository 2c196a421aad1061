"""Command-line entry point.

Exit status: 0 on success, 2 on a configuration error, 3 on a numerical error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import replace

import numpy as np
import yaml

from coherent_lora.chirp import LoraParams
from coherent_lora.errors import ConfigurationError, DomainError, NumericalError
from coherent_lora.experiments import (
    PRESETS,
    load_spec,
    preset,
    rows_to_csv,
    run_experiment,
    single_point,
    spec_to_dict,
)
from coherent_lora.interference import InterfererConfig, received_pattern

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _sir(text: str) -> float:
    return math.inf if text.lower() in ("inf", "none", "awgn") else float(text)


def _point_args(sp, snr_required: bool):
    sp.add_argument("--sf", type=int, default=7)
    sp.add_argument("--snr", type=float, required=snr_required, help="SNR in dB")
    sp.add_argument("--sir", type=_sir, default=math.inf, help="SIR in dB; 'inf' for AWGN only")
    sp.add_argument("--lambda-cfo", type=float, default=0.0)
    sp.add_argument("--receiver", choices=("coherent", "noncoherent"), default="coherent")
    sp.add_argument("--method", choices=("mc", "exact", "bound", "approx"), default="mc")
    sp.add_argument("--frame-len", type=int, default=20)
    sp.add_argument("--sigma-tr2", type=float, default=0.0)
    sp.add_argument("--trials", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--pair-samples", type=int, default=None,
                    help="subsample interferer symbol pairs in analytic averages")
    sp.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coherent-lora", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment spec (YAML)")
    run.add_argument("specfile")
    run.add_argument("--out", default=None)
    run.add_argument("--trials", type=int, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--workers", type=int, default=None)

    pre = sub.add_parser("preset", help="run (or print) a figure preset")
    pre.add_argument("name", help=f"one of {', '.join(PRESETS)}")
    pre.add_argument("--out", default=None)
    pre.add_argument("--trials", type=int, default=None)
    pre.add_argument("--seed", type=int, default=None)
    pre.add_argument("--workers", type=int, default=None)
    pre.add_argument("--print-spec", action="store_true", help="print the spec as YAML instead of running")

    pat = sub.add_parser("pattern", help="dump the received interference pattern as CSV")
    pat.add_argument("--sf", type=int, default=7)
    pat.add_argument("--s1", type=int, default=83)
    pat.add_argument("--s2", type=int, default=4)
    pat.add_argument("--tau", type=float, default=88.4)
    pat.add_argument("--lambda-cfo", type=float, default=0.4)
    pat.add_argument("--sir", type=float, default=0.0)
    pat.add_argument("--omega", type=float, default=0.0)
    pat.add_argument("--out", default=None)

    req = sub.add_parser("required-snr", help="SNR needed for a target FER")
    _point_args(req, snr_required=False)
    req.add_argument("--target", type=float, default=0.1)
    req.add_argument("--bracket", type=float, nargs=2, default=(-20.0, 10.0), metavar=("LOW", "HIGH"))

    for name in ("ser", "fer"):
        sp = sub.add_parser(name, help=f"single-point {name.upper()} evaluation")
        _point_args(sp, snr_required=True)
    return parser


def _overrides(args):
    return {"n_trials": args.trials, "seed": args.seed, "workers": args.workers}


def _write(text: str, out: str | None):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _pattern(args):
    p = LoraParams(args.sf)
    cfg = InterfererConfig(args.s1, args.s2, args.tau, args.lambda_cfo, p_i_db=-args.sir, omega=args.omega)
    R = received_pattern(cfg, p)
    lines = [("bin", "magnitude", "re", "im")]
    lines += [(k, repr(float(np.abs(r))), repr(float(r.real)), repr(float(r.imag))) for k, r in enumerate(R)]
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(lines)
    _write(buf.getvalue(), args.out)


def _point(args, metric):
    quad = {"pair_samples": args.pair_samples} if args.pair_samples else {}
    F = 1 if metric == "ser" else args.frame_len
    kw = dict(metric=metric, sf=args.sf, snr_db=getattr(args, "snr", None), sir_db=args.sir,
              lambda_cfo=args.lambda_cfo, receiver=args.receiver, method=args.method, F=F,
              n_trials=args.trials, seed=args.seed, sigma_tr2=args.sigma_tr2, quad=quad, workers=args.workers)
    if metric == "required_snr":
        kw.update(snr_db=None, target_fer=args.target, snr_bracket=tuple(args.bracket))
    row = single_point(**kw)
    if isinstance(row.value, str) and row.value.startswith("error:numerical"):
        raise NumericalError(f"evaluation failed ({row.value})")
    if isinstance(row.value, str) and row.value.startswith("error:"):
        raise ConfigurationError(f"evaluation failed ({row.value})")
    _write(rows_to_csv([row]), args.out)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            spec = load_spec(args.specfile, _overrides(args))
            print(run_experiment(spec, args.out))
        elif args.command == "preset":
            spec = preset(args.name)
            if args.print_spec:
                _write(yaml.safe_dump(spec_to_dict(spec), sort_keys=False), args.out)
                return EXIT_OK
            changes = {k: v for k, v in _overrides(args).items() if v is not None}
            spec = replace(spec, **changes)
            print(run_experiment(spec, args.out or spec.output))
        elif args.command == "pattern":
            _pattern(args)
        elif args.command == "required-snr":
            _point(args, "required_snr")
        else:
            _point(args, args.command)
    except (ConfigurationError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
