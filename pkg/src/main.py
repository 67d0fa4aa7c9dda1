"""
Command-line entry point: construct, verify, simulate, distance, bound and
catalog.
"""
import argparse
from dataclasses import dataclass, field as dataclass_field, replace
import json
import logging
import math
import os
import sys

from core import affine, channel, code, common, construct, cycles, decoder, harness
from utility import presets


logger = logging.getLogger(__name__)

GIRTH_SCAN = 16


@dataclass
class RunConfig:
    """Validated parameters of one CLI invocation."""

    command: str
    code_path: str = None
    out: str = None
    P: int = None
    e: int = 8
    L: int = 6
    seed: int = 0
    mode: str = "proposed"
    preset: int = None
    poly: str = None
    p_values: list = dataclass_field(default_factory=list)
    trials: int = 200
    criterion: str = "degenerate"
    workers: int = 1
    max_failures: int = 0
    max_cycle_len: int = 16
    side: str = "both"
    rate: float = None
    fmt: str = "text"
    quiet: bool = False
    decoder_params: decoder.DecoderParams = dataclass_field(default_factory=decoder.DecoderParams)
    construction: construct.ConstructionParams = dataclass_field(
        default_factory=construct.ConstructionParams)

    @classmethod
    def from_args(cls, args, settings=None):
        """Merge flags over the settings file."""
        settings = settings or common.default_settings()
        params = decoder.DecoderParams.from_settings(settings)
        overrides = {
            "max_iters": getattr(args, "max_iters", None),
            "stagnation_window": getattr(args, "stagnation_window", None),
            "d_window": getattr(args, "d_window", None),
            "u": getattr(args, "u", None),
        }
        params = replace(params, **{k: v for k, v in overrides.items() if v is not None})
        if getattr(args, "decoder", None):
            params = replace(params, post_processing=args.decoder == "bp-post")

        def pick(name, section, key, getter="get"):
            value = getattr(args, name, None)
            if value is not None:
                return value
            return getattr(settings, getter)(section, key)

        config = cls(
            command=args.command,
            code_path=getattr(args, "code", None),
            out=getattr(args, "out", None),
            P=getattr(args, "P", None),
            e=pick("e", "construction", "default_e", "getint"),
            L=pick("L", "construction", "default_L", "getint"),
            seed=getattr(args, "seed", None) or 0,
            mode=getattr(args, "mode", None) or "proposed",
            preset=getattr(args, "preset", None),
            poly=getattr(args, "poly", None),
            trials=pick("trials", "simulation", "trials", "getint"),
            criterion=pick("criterion", "simulation", "criterion"),
            workers=pick("workers", "simulation", "workers", "getint"),
            max_failures=pick("max_failures", "simulation", "max_failures", "getint"),
            max_cycle_len=getattr(args, "max_cycle_len", None) or 16,
            side=getattr(args, "side", None) or "both",
            rate=getattr(args, "rate", None),
            fmt=getattr(args, "format", None) or "text",
            quiet=args.quiet,
            decoder_params=params,
            construction=construct.ConstructionParams.from_settings(settings),
        )
        for spec in getattr(args, "p_d", None) or []:
            config.p_values.extend(common.parse_range(spec))
        if config.command == "simulate" and config.out is None:
            config.out = settings.get("system", "results_dir", fallback="results")
        return config

    def validate(self):
        self.decoder_params.validate()
        self.construction.validate()
        if self.command == "construct":
            if self.P is None and self.preset is None:
                raise ValueError("construct needs --P or --preset")
            if self.e < 2 or self.L < 2 or self.L % 2:
                raise ValueError(f"invalid e={self.e} or L={self.L}")
            if self.mode not in construct.MODES:
                raise ValueError(f"unknown mode {self.mode!r}")
        if self.command == "simulate":
            if not self.p_values:
                raise ValueError("simulate needs at least one --p-d")
            if any(not 0 <= p < 0.75 for p in self.p_values):
                raise ValueError("depolarizing probabilities must lie in [0, 3/4)")
            if self.trials < 1 or self.workers < 1 or self.max_failures < 0:
                raise ValueError("--trials and --workers must be positive")
            if self.criterion not in harness.CRITERIA:
                raise ValueError(f"unknown criterion {self.criterion!r}")
        if self.command == "distance" and (self.max_cycle_len < 4 or self.max_cycle_len % 4):
            raise ValueError("--max-cycle-len must be a positive multiple of 4")
        if self.command == "bound":
            if self.rate is None and not self.p_values:
                raise ValueError("bound needs --rate or --p-d")
            if self.rate is not None and not 0 < self.rate < 1:
                raise ValueError("--rate must lie in (0, 1)")
        return self


def _number(text):
    try:
        return common.parse_number(text)
    except (ValueError, ZeroDivisionError) as err:
        raise argparse.ArgumentTypeError(f"not a number: {text}") from err


def build_parser():
    """Create the argument parser."""
    parser = argparse.ArgumentParser(
        prog="qldpc",
        description="Quantum LDPC codes from affine permutation matrices over F_2^e.",
    )
    parser.add_argument("--quiet", action="store_true", help="disable progress logging")
    parser.add_argument("--settings", help="settings INI file")
    parser.add_argument("--log-level", help="logging level (overrides QLDPC_LOG)")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Set up the construct command
    sub = subparsers.add_parser("construct", help="construct and label a code")
    sub.add_argument("--P", type=int, help="block size")
    sub.add_argument("--e", type=int, help="field extension degree")
    sub.add_argument("--L", type=int, help="number of column blocks (even)")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--mode", choices=construct.MODES, default="proposed")
    sub.add_argument("--preset", type=int, help="use the published generators for this P")
    sub.add_argument("--poly", help="primitive polynomial as LSB-first coefficients, e.g. 101110001")
    sub.add_argument("--out", help="code file (stdout if omitted)")

    # Set up the verify command
    sub = subparsers.add_parser("verify", help="check a code file")
    sub.add_argument("code")
    sub.add_argument("--format", choices=("text", "json"), default="text")

    # Set up the simulate command
    sub = subparsers.add_parser("simulate", help="estimate the frame error rate")
    sub.add_argument("code")
    sub.add_argument("--p-d", action="append", required=True,
                     help="depolarizing probability or range a:b:step (repeatable)")
    sub.add_argument("--trials", type=int)
    sub.add_argument("--criterion", choices=harness.CRITERIA)
    sub.add_argument("--decoder", choices=decoder.DECODERS)
    sub.add_argument("--max-iters", type=int)
    sub.add_argument("--stagnation-window", type=int)
    sub.add_argument("--d-window", type=int)
    sub.add_argument("--u", type=int)
    sub.add_argument("--workers", type=int)
    sub.add_argument("--max-failures", type=int)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", help="results directory")
    sub.add_argument("--format", choices=("text", "json", "csv"), default="text")

    # Set up the distance command
    sub = subparsers.add_parser("distance", help="upper-bound the minimum distance")
    sub.add_argument("code")
    sub.add_argument("--max-cycle-len", type=int, default=16)
    sub.add_argument("--format", choices=("text", "json", "csv"), default="text")

    # Set up the bound command
    sub = subparsers.add_parser("bound", help="hashing bound and threshold")
    sub.add_argument("--rate", type=_number)
    sub.add_argument("--p-d", action="append")

    # Set up the catalog command
    sub = subparsers.add_parser("catalog", help="dump the unavoidable cycle catalogs")
    sub.add_argument("code")
    sub.add_argument("--side", choices=("Gamma", "Delta", "both"), default="both")
    sub.add_argument("--format", choices=("json", "csv"), default="json")
    return parser


def _load_code(path):
    with open(path, "rb") as stream:
        return code.deserialize(stream.read())


def _emit(text, out=None):
    if out:
        with open(out, "w", encoding="utf-8") as stream:
            stream.write(text)
    else:
        sys.stdout.write(text)


def run_construct(config):
    progress = None if config.quiet else harness.SweepProgress()
    if config.preset is not None:
        gen = presets.preset(config.preset)
        P = gen.P
    else:
        gen, P = None, config.P
    result = construct.build_code(P, config.e, config.L, config.seed, config.mode,
                                  config.poly, gen, config.construction, progress)
    report = code.verify_orthogonality(result, rng=config.seed)
    if not report.ok:
        raise common.InvariantViolation(f"constructed code is not orthogonal: {report}")
    k, _, _ = code.compute_dimension(result)
    logger.info("Code ready: n=%d, k=%d, rate %.4f", result.n, k, k / result.n)
    _emit(code.serialize(result).decode("utf-8") + "\n", config.out)
    return 0


def _determinant_counts(css, side):
    """Number of zero cycle determinants per u(j) in a catalog."""
    counts = {}
    for record in css.catalog(side):
        zero = cycles.cycle_determinant(css.field, record) == 0
        counts.setdefault(record.utcbc_j, [0, 0])[0 if zero else 1] += 1
    return {j: {"deficient": zero, "full_rank": full} for j, (zero, full) in counts.items()}


def verify_report(css):
    """Collect the structural checks of a code.

    Returns:
        tuple[dict, bool]: The report and whether every check passed.
    """
    orthogonality = code.verify_orthogonality(css)
    girth = affine.girth(css.hx, css.hz, max_len=GIRTH_SCAN)
    k, rank_x, rank_z = code.compute_dimension(css)
    report = {
        "n": css.n, "k": k, "rank_H_X": rank_x, "rank_H_Z": rank_z,
        "mode": css.mode,
        "orthogonal": orthogonality.ok,
        "pairs_checked": orthogonality.pairs_checked,
        "requirement": construct.check_requirement1(css.gen),
        "girth": girth if math.isfinite(girth) else f">{GIRTH_SCAN}",
    }
    ok = orthogonality.ok and report["requirement"]
    if css.mode == "proposed":
        report["noncommuting"] = construct.check_incomplete_commutativity(css.gen)
        report["cycle_criterion"] = construct.check_cycle_criterion(css.gen)
        ok = ok and report["noncommuting"] and report["cycle_criterion"]
        if css.L == 6:
            for side in cycles.SIDES:
                counts = _determinant_counts(css, side)
                report[f"utcbc_{side}"] = counts
                ok = ok and all(counts[j]["full_rank"] == 0 for j in (0, 1))
                ok = ok and counts[2]["deficient"] == 0
    report["ok"] = ok
    return report, ok


def run_verify(config):
    report, ok = verify_report(_load_code(config.code_path))
    if config.fmt == "json":
        _emit(json.dumps(report, indent=2) + "\n")
    else:
        lines = [f"{key}: {value}" for key, value in report.items()]
        _emit("\n".join(lines) + "\n")
    return 0 if ok else 1


def run_simulate(config):
    css = _load_code(config.code_path)
    os.makedirs(config.out, exist_ok=True)
    progress = None if config.quiet else harness.SweepProgress()

    trials_path = os.path.join(config.out, "trials.jsonl")
    with open(trials_path, "w", encoding="utf-8") as stream:
        summaries = harness.run_sweep(
            css, config.p_values, config.trials, config.criterion, config.decoder_params,
            config.seed, config.workers, config.max_failures, progress,
            sink=lambda result: harness.write_trials([result], stream),
        )

    k, _, _ = code.compute_dimension(css)
    meta = {
        "code": os.path.abspath(config.code_path), "n": css.n, "k": k,
        "decoder": config.decoder_params.decoder, "seed": config.seed, "trials": config.trials,
        "hashing_threshold": channel.hashing_threshold(k / css.n) if 0 < k < css.n else None,
    }
    with open(os.path.join(config.out, "summary.json"), "w", encoding="utf-8") as stream:
        harness.write_summary(summaries, stream, meta)
    with open(os.path.join(config.out, "fer.csv"), "w", encoding="utf-8", newline="") as stream:
        harness.write_csv(summaries, stream)

    if config.fmt == "csv":
        harness.write_csv(summaries, sys.stdout)
    elif config.fmt == "json":
        harness.write_summary(summaries, sys.stdout, meta)
    else:
        for summary in summaries:
            low, high = summary.interval(config.criterion)
            _emit(f"p_D={summary.p_d}: FER={summary.fer(config.criterion):.4g} "
                  f"[{low:.4g}, {high:.4g}] ({summary.failures(config.criterion)}/"
                  f"{summary.trials}, logical errors {summary.logical_errors})\n")
    return 0


def run_distance(config):
    css = _load_code(config.code_path)
    try:
        bound = cycles.distance_upper_bound(css, config.max_cycle_len)
    except common.NoDeficientCycles as err:
        logger.info(str(err))
        _emit(f"d: no bound from cycles up to length {config.max_cycle_len}\n"
              if config.fmt == "text" else json.dumps({"d": None}) + "\n")
        return 0
    if config.fmt == "csv":
        cycles.weight_csv(bound, sys.stdout)
    elif config.fmt == "json":
        _emit(json.dumps({
            "d": bound.d, "d_X": bound.d_x, "d_Z": bound.d_z,
            "A_X": {str(w): c for w, c in sorted(bound.weights_x.counts.items())},
            "A_Z": {str(w): c for w, c in sorted(bound.weights_z.counts.items())},
        }, indent=2) + "\n")
    else:
        _emit(f"d <= {bound.d} (d_X <= {bound.d_x}, d_Z <= {bound.d_z})\n")
    return 0


def run_bound(config):
    if config.rate is not None:
        _emit(f"{channel.hashing_threshold(config.rate):.6f}\n")
    for p_d in config.p_values:
        _emit(f"p_D={p_d}: {channel.hashing_bound(p_d):.6f}\n")
    return 0


def run_catalog(config):
    css = _load_code(config.code_path)
    sides = cycles.SIDES if config.side == "both" else (config.side,)
    rows = []
    for side in sides:
        for record in css.catalog(side):
            rows.append({
                "side": side, "j": record.utcbc_j, "r": record.anchor_row,
                "columns": list(record.columns), "rows": list(record.rows),
                "labels": [int(css.field.log(label)) for label in record.labels],
                "determinant": int(cycles.cycle_determinant(css.field, record)),
            })
    if config.fmt == "json":
        _emit(json.dumps(rows) + "\n")
    else:
        _emit("side,j,r,columns,rows,log_labels,determinant\n")
        for row in rows:
            _emit(",".join([row["side"], str(row["j"]), str(row["r"]),
                            " ".join(map(str, row["columns"])), " ".join(map(str, row["rows"])),
                            " ".join(map(str, row["labels"])), str(row["determinant"])]) + "\n")
    return 0


RUNNERS = {
    "construct": run_construct,
    "verify": run_verify,
    "simulate": run_simulate,
    "distance": run_distance,
    "bound": run_bound,
    "catalog": run_catalog,
}


def main(argv=None):
    """Entry point for the command line.

    Args:
        argv (list[str], optional): Arguments without the program name.

    Returns:
        int: 0 on success, 1 on an operational failure, 2 on a usage error.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_request:
        return int(exit_request.code or 0)

    # Load the settings and set up logging
    if args.settings or os.environ.get("QLDPC_SETTINGS"):
        settings = common.load_settings(args.settings)
    else:
        settings = common.default_settings()
    common.settings = settings
    common.setup_logging(args.log_level)

    try:
        config = RunConfig.from_args(args, settings).validate()
    except (ValueError, ZeroDivisionError) as err:
        parser.print_usage(sys.stderr)
        print(f"error: {err}", file=sys.stderr)
        return 2

    try:
        return RUNNERS[config.command](config)
    except (common.QldpcError, OSError) as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
