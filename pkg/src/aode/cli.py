"""``aode`` command line: merge, wer, schedule, toy and report subcommands.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path
from typing import Sequence

from . import __version__

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INVARIANT = 3


class CliError(Exception):
    def __init__(self, message: str, code: int) -> None:
        super().__init__(message)
        self.code = code


def _usage(msg: str) -> CliError:
    return CliError(msg, EXIT_USAGE)


def _data(msg: str) -> CliError:
    return CliError(msg, EXIT_DATA)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1 instead of argparse's 2
        self.print_usage(sys.stderr)
        raise CliError(f"{self.prog}: {message}", EXIT_USAGE)


# -- merge ----------------------------------------------------------------------

def _parse_weights(text: str, n: int) -> tuple[float, ...] | None:
    if text == "equal":
        return None
    try:
        weights = tuple(float(w) for w in text.split(","))
    except ValueError:
        raise _usage(f"--weights: cannot parse {text!r}; expected 'equal' or a comma list") from None
    if len(weights) != n:
        raise _usage(f"--weights: got {len(weights)} weights for {n} inputs")
    return weights


def cmd_merge(args: argparse.Namespace) -> int:
    from .merge import MergeError, MergeSpec, average_experts, diff_norm
    from .tensor_store import CheckpointError, NonFiniteValue, read_checkpoint, validate_compat, write_checkpoint

    if len(args.inputs) < 2:
        raise _usage("merge: need at least two input checkpoints")
    weights = _parse_weights(args.weights, len(args.inputs))
    spec = MergeSpec(weights=weights, include=args.include, base=args.base)
    try:
        spec.resolve(len(args.inputs))
    except MergeError as exc:
        raise _usage(f"--weights: {exc}") from None
    ckpts = []
    for path in args.inputs:
        try:
            ckpts.append(read_checkpoint(path))
        except (OSError, CheckpointError) as exc:
            raise _data(f"{path}: {exc}") from None
    report = validate_compat(ckpts)
    if not report.compatible:
        lines = "\n".join(f"  {name}: {reason}" for name, reason in report.mismatches)
        raise _data(f"incompatible checkpoints:\n{lines}")
    merged = average_experts(ckpts, spec, sources=[str(p) for p in args.inputs])
    try:
        write_checkpoint(merged, args.output)
    except NonFiniteValue as exc:
        raise CliError(f"merged checkpoint: {exc}", EXIT_INVARIANT) from None
    except OSError as exc:
        raise _data(f"{args.output}: {exc}") from None
    diffs = diff_norm(merged, ckpts[0])
    print(f"wrote {args.output} (weights {merged.metadata['merge.weights']})")
    print(f"distance to {args.inputs[0]}:")
    width = max(len(n) for n in diffs.per_tensor)
    for name, dist in diffs.per_tensor.items():
        print(f"  {name.ljust(width)}  {dist:.6g}")
    print(f"  {'(global)'.ljust(width)}  {diffs.total:.6g}")
    return EXIT_OK


# -- wer ------------------------------------------------------------------------

def read_transcripts(path: str | Path) -> dict[str, str]:
    """``utt_id<TAB>transcript`` per line; blank lines are skipped."""
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text("utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise _data(f"{path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        utt, _, transcript = line.partition("\t")
        utt = utt.strip()
        if not utt:
            raise _data(f"{path}:{lineno}: missing utterance id")
        if utt in out:
            raise _data(f"{path}:{lineno}: duplicate utterance id {utt!r}")
        out[utt] = transcript
    return out


def _normalizer(choice: str):
    from .eval.normalize import NormalizationConfig, default_config, load_config

    if choice == "default":
        return default_config()
    if choice == "none":
        return NormalizationConfig(lowercase=False, strip_punctuation=False)
    try:
        return load_config(choice)
    except (OSError, ValueError) as exc:
        raise _usage(f"--normalize: {choice}: {exc}") from None


def cmd_wer(args: argparse.Namespace) -> int:
    from .eval import EmptyReference, corpus_wer, eval_report, normalize_text

    if len(args.ref) != len(args.hyp):
        raise _usage("wer: --ref and --hyp must be given the same number of times")
    names = args.domain or []
    if names and len(names) != len(args.ref):
        raise _usage("wer: --domain must be given once per --ref/--hyp pair or not at all")
    if not names:
        names = [Path(r).stem for r in args.ref]
    if len(set(names)) != len(names):
        raise _usage(f"wer: duplicate domain names {names}; pass --domain")
    cfg = _normalizer(args.normalize)
    per_domain = {}
    for name, ref_path, hyp_path in zip(names, args.ref, args.hyp):
        refs, hyps = read_transcripts(ref_path), read_transcripts(hyp_path)
        missing = sorted(set(refs) - set(hyps))
        extra = sorted(set(hyps) - set(refs))
        if missing or extra:
            parts = []
            if missing:
                parts.append(f"missing from {hyp_path}: {', '.join(missing)}")
            if extra:
                parts.append(f"missing from {ref_path}: {', '.join(extra)}")
            raise _data("unmatched utterance ids; " + "; ".join(parts))
        pairs = [(normalize_text(refs[u], cfg).split(), normalize_text(hyps[u], cfg).split()) for u in refs]
        try:
            per_domain[name] = corpus_wer(pairs)
        except EmptyReference as exc:
            raise _data(f"{ref_path}: {exc}") from None
    report = eval_report(per_domain)
    print(report.render())
    if args.json:
        payload = report.as_dict()
        Path(args.json).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


# -- schedule -------------------------------------------------------------------

def cmd_schedule(args: argparse.Namespace) -> int:
    from .schedules import ScheduleError, StlrConfig, indexed_layer_rules, llrd_multipliers, stlr_lr

    try:
        cfg = StlrConfig(args.lr_max, args.total_steps, args.cut_frac, args.ratio)
    except ScheduleError as exc:
        raise _usage(str(exc)) from None
    rates = names = None
    if args.llrd_decay is not None:
        if args.layers is None or args.layers < 1:
            raise _usage("--layers: a positive layer count is required with --llrd-decay")
        names = [f"enc.{i}" for i in range(args.layers)] + ["out"]
        rules = indexed_layer_rules(args.layers, pattern="enc.{i}", non_encoder="out")
        try:
            rates = llrd_multipliers(names, rules, args.llrd_decay, args.layers)
        except ScheduleError as exc:
            raise _usage(f"--llrd-decay: {exc}") from None
    lines = ["step,lr"]
    lines += [f"{s},{stlr_lr(s, cfg)!r}" for s in range(cfg.total_steps + 1)]
    if rates is not None:
        lines += ["", "name,multiplier"]
        lines += [f"{name},{rates[name]!r}" for name in names]
    print("\n".join(lines))
    return EXIT_OK


# -- toy ------------------------------------------------------------------------

def _parse_seeds(items: Sequence[str]) -> list[int]:
    seeds: list[int] = []
    for item in items:
        for part in item.split(","):
            part = part.strip()
            if not part:
                continue
            try:
                if re.fullmatch(r"\d+-\d+", part):
                    lo, hi = part.split("-")
                    seeds.extend(range(int(lo), int(hi) + 1))
                else:
                    seeds.append(int(part))
            except ValueError:
                raise _usage(f"--seeds: cannot parse {part!r}") from None
    return seeds


def cmd_toy(args: argparse.Namespace) -> int:
    from .tensor_store import write_checkpoint
    from .toy_lab.experiment import ConfigError, load_experiment_config, row_label, run_experiment
    from .toy_lab.training import TrainingDiverged

    try:
        cfg = load_experiment_config(args.config)
    except ConfigError as exc:
        raise _usage(f"--config: {args.config}: {exc}") from None
    except OSError as exc:
        raise _usage(f"--config: {exc}") from None
    seeds = _parse_seeds(args.seeds) if args.seeds else list(cfg.seeds)
    if not seeds:
        raise _usage("--seeds: no seeds given")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    totals: dict[str, list[float]] = {}
    for seed in seeds:
        try:
            run = run_experiment(cfg, seed, keep_models=True)
        except TrainingDiverged as exc:
            raise CliError(f"seed {seed}: {exc}", EXIT_INVARIANT) from None
        seed_dir = out / f"seed_{seed}"
        (seed_dir / "experts").mkdir(parents=True, exist_ok=True)
        (seed_dir / "report.json").write_text(run.report.to_json(), encoding="utf-8")
        write_checkpoint(run.pretrained.to_checkpoint(source="pretrained", seed=str(seed)),
                         seed_dir / "pretrained.aode")
        for name, model in run.experts.items():
            write_checkpoint(model.to_checkpoint(source=f"expert:{name}", seed=str(seed)),
                             seed_dir / "experts" / f"{name}.aode")
        for key, row in run.report.rows.items():
            totals.setdefault(key, []).append(row["geometric_mean"])
        print(f"seed {seed}")
        print(run.report.render())
        print()
    means = {key: sum(v) / len(v) for key, v in totals.items()}
    best = min(means, key=means.get)
    summary = {
        "seeds": seeds,
        "mean_geometric_mean": means,
        "best_procedure": best,
        "config": cfg.to_dict(),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    width = max(len(row_label(k)) for k in means)
    print(f"mean geometric mean over {len(seeds)} seed(s):")
    for key, value in means.items():
        marker = "  <- best" if key == best else ""
        print(f"  {row_label(key).ljust(width)}  {value:.3f}{marker}")
    return EXIT_OK


# -- report ---------------------------------------------------------------------

def cmd_report(args: argparse.Namespace) -> int:
    from .reports import ReportError, combine_tables, load_report, render_csv, render_table
    from .toy_lab.experiment import row_label

    try:
        tables = [load_report(p) for p in args.inputs]
        combined = combine_tables(tables, args.inputs)
    except ReportError as exc:
        raise _data(str(exc)) from None
    if args.format == "csv":
        sys.stdout.write(render_csv(combined))
    else:
        print(render_table(combined, row_label))
    return EXIT_OK


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aode", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"aode {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("merge", help="average expert checkpoints")
    p.add_argument("inputs", nargs="+", help="checkpoint files (at least two)")
    p.add_argument("--weights", default="equal", help="'equal' or comma-separated weights summing to 1")
    p.add_argument("--output", required=True, help="merged checkpoint path")
    p.add_argument("--include", default=None, help="glob of tensors to average; others copy from --base")
    p.add_argument("--base", type=int, default=0, help="index of the input supplying excluded tensors")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("wer", help="score hypotheses against references")
    p.add_argument("--ref", action="append", required=True, help="reference transcript file (repeatable)")
    p.add_argument("--hyp", action="append", required=True, help="hypothesis transcript file (repeatable)")
    p.add_argument("--domain", action="append", help="domain name for each --ref/--hyp pair")
    p.add_argument("--normalize", default="default", help="'default', 'none' or a JSON config path")
    p.add_argument("--json", default=None, help="write the machine-readable report here")
    p.set_defaults(func=cmd_wer)

    p = sub.add_parser("schedule", help="print STLR and LLRD tables as CSV")
    p.add_argument("--total-steps", type=int, required=True)
    p.add_argument("--lr-max", type=float, required=True)
    p.add_argument("--cut-frac", type=float, default=0.15)
    p.add_argument("--ratio", type=float, default=32.0)
    p.add_argument("--llrd-decay", type=float, default=None)
    p.add_argument("--layers", type=int, default=None, help="number of encoder layers for --llrd-decay")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("toy", help="run the synthetic forgetting experiment")
    p.add_argument("--config", default=None, help="experiment JSON (default: shipped config)")
    p.add_argument("--seeds", nargs="*", default=None, help="seeds, e.g. '0 1 2', '0,1' or '0-9'")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("report", help="render JSON reports as one table")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
