"""Command-line entry point: ``polarnet run`` and ``polarnet validate``."""

from __future__ import annotations

import argparse
import sys

from pydantic import ValidationError

from .experiments import ScenarioConfig, default_workers, emit_report, load_config, run_scenario

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        where = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"  {where}: {err['msg']}")
    return "\n".join(lines)


def _load(path: str, overrides: dict) -> ScenarioConfig:
    config = load_config(path)
    if overrides:
        data = config.model_dump()
        data.update(overrides)
        config = ScenarioConfig.model_validate(data)
    return config


def _summary(report) -> str:
    rows = [f"scenario {report.name}: layers {report.layer_sizes}"]
    for pid, s in report.summaries.items():
        rows.append(
            f"  {pid:<16} normalized final {s.mean_normalized_final:.4f}  "
            f"mean SNR_DL {s.mean_snr_dl:.4g}  mean SNR_UL {s.mean_snr_ul:.4g}"
        )
    if report.dag is not None:
        rows.append(
            f"  select-one optimum: normalized {report.dag.mean_normalized_optimum:.4f}, "
            f"{report.dag.reference_policy}/optimum ratio {report.dag.mean_reference_over_optimum:.4f}"
        )
    for b in report.bounds:
        rows.append(
            f"  bound [{b.policy}, {b.distribution}]: closed-form {b.closed_form_bound:.4g}, "
            f"E|h|^2/sigma^2 {b.telescoped_expectation:.4g} (MC {b.monte_carlo_channel_power:.4g}), "
            f"optimized SNR_DL {b.mean_optimized_snr_dl:.4g} ({b.exceedance_over_closed_form_bound:.3g}x closed-form)"
        )
    return "\n".join(rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polarnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write plot data")
    run.add_argument("--config", required=True, help="JSON scenario file")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--format", choices=("csv", "json"), default="json")
    run.add_argument("--experiments", type=int, help="override experiment count")
    run.add_argument("--seed", type=int, help="override root seed")
    run.add_argument("--outer-passes", type=int, help="override outer pass count N")
    run.add_argument("--workers", type=int, help="worker processes (default: $POLARNET_WORKERS or CPU count)")
    run.add_argument("--quiet", action="store_true", help="do not print the summary")

    val = sub.add_parser("validate", help="check a scenario file without running it")
    val.add_argument("--config", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.command == "run":
        for key, value in (
            ("experiments", args.experiments),
            ("root_seed", args.seed),
            ("outer_passes", args.outer_passes),
        ):
            if value is not None:
                overrides[key] = value
    try:
        config = _load(args.config, overrides)
    except ValidationError as exc:
        print(f"invalid config {args.config}:\n{_format_validation(exc)}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"cannot read config {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        print(f"{args.config}: ok ({config.experiments} experiments, {len(config.policies)} policies)")
        return EXIT_OK

    try:
        workers = args.workers if args.workers is not None else default_workers()
        report = run_scenario(config, workers=workers)
        paths = emit_report(report, args.format, args.out)
    except Exception as exc:  # noqa: BLE001 - any failure maps to exit code 1
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if not args.quiet:
        print(_summary(report))
        for p in paths:
            print(f"wrote {p}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
