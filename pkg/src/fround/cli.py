"""Command-line front end.

    fround validate --config scenario.json
    fround run --config scenario.json --out results/ [--seed N] [--emit-events] [--trace t.csv]
    fround sweep --sweep sweep.json --out results/ [--parallel N]

Exit codes: 0 success, 1 invalid configuration, 2 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .errors import InvalidConfig, NonMonotonicTime, ParseError
from .metrics import METRICS_FIELDS, RunMetrics, aggregate, metrics_csv, timing_csv
from .mobility import import_trace
from .model import ScenarioConfig, validate_config
from .netsim import run

log = logging.getLogger("fround")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2
SWEEP_FIELDS = ("base_seed",) + METRICS_FIELDS


def _default_counts() -> list[int]:
    return list(range(500, 4001, 500))


def _default_fractions() -> list[float]:
    return [round(0.05 * i, 2) for i in range(9)]


@dataclass(frozen=True)
class SweepSpec:
    vehicle_counts: list[int] = field(default_factory=_default_counts)
    rogue_fractions: list[float] = field(default_factory=_default_fractions)
    seeds: list[int] = field(default_factory=lambda: [0])
    base: ScenarioConfig = field(default_factory=ScenarioConfig)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SweepSpec:
        if not isinstance(data, Mapping):
            raise InvalidConfig("<root>", "expected a JSON object")
        unknown = sorted(set(data) - {"vehicle_counts", "rogue_fractions", "seeds", "base"})
        if unknown:
            raise InvalidConfig(unknown[0], "unknown field")
        base = ScenarioConfig.from_dict(data.get("base", {}))
        spec = cls(
            vehicle_counts=[int(v) for v in data.get("vehicle_counts", _default_counts())],
            rogue_fractions=[float(v) for v in data.get("rogue_fractions", _default_fractions())],
            seeds=[int(v) for v in data.get("seeds", [base.seed])],
            base=base,
        )
        for name in ("vehicle_counts", "rogue_fractions", "seeds"):
            if not getattr(spec, name):
                raise InvalidConfig(name, "must be a non-empty list")
        for cfg, _ in spec.cells():
            validate_config(cfg)
        return spec

    def cells(self) -> list[tuple[ScenarioConfig, int]]:
        """Every (config, base seed) pair in canonical order."""
        out = []
        for n in self.vehicle_counts:
            for f in self.rogue_fractions:
                for seed in self.seeds:
                    cfg = self.base.with_(n_vehicles=n, rogue_fraction=f, seed=cell_seed(seed, n, f))
                    out.append((cfg, seed))
        return out


def cell_seed(seed: int, n_vehicles: int, rogue_fraction: float) -> int:
    digest = hashlib.blake2b(f"{n_vehicles}:{rogue_fraction!r}".encode(), digest_size=8).digest()
    return seed ^ int.from_bytes(digest, "little")


def _load_json_file(path: str) -> Any:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(
            "<json>", f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None


def load_config(path: str) -> ScenarioConfig:
    return validate_config(ScenarioConfig.from_dict(_load_json_file(path)))


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_validate(config_path: str) -> int:
    try:
        cfg = load_config(config_path)
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    except InvalidConfig as exc:
        return _fail(EXIT_INVALID, str(exc))
    sys.stdout.write(cfg.to_json())
    return EXIT_OK


def cmd_run(config_path: str, seed_override: int | None, out_dir: str,
            emit_events: bool = False, trace_path: str | None = None) -> int:
    try:
        cfg = load_config(config_path)
        if seed_override is not None:
            cfg = validate_config(cfg.with_(seed=seed_override))
        trace = import_trace(trace_path) if trace_path else None
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    except (InvalidConfig, ParseError, NonMonotonicTime) as exc:
        return _fail(EXIT_INVALID, str(exc))

    try:
        result = run(cfg, record_events=emit_events, trace=trace)
    except ValueError as exc:
        return _fail(EXIT_INVALID, str(exc))
    metrics = aggregate(result)
    log.info("run done: %d windows, tpr=%.3f fpr=%.3f plr=%.4f",
             metrics.windows, metrics.tpr, metrics.fpr, metrics.plr)
    try:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write(out / "metrics.csv", metrics_csv([metrics]))
        _write(out / "timing.csv", timing_csv([metrics]))
        reports = [r.to_dict(timing=False) for r in result.reports]
        _write(out / "reports.json", json.dumps(reports, indent=2) + "\n")
        if emit_events:
            _write(out / "events.csv", result.events.to_csv())
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    return EXIT_OK


def _run_cell(cfg: ScenarioConfig) -> RunMetrics:
    return aggregate(run(cfg))


def _sweep_line(metrics: RunMetrics, base_seed: int) -> str:
    return ",".join([str(base_seed)] + metrics.row())


def cmd_sweep(sweep_path: str, out_dir: str, parallelism: int | None = None) -> int:
    try:
        spec = SweepSpec.from_dict(_load_json_file(sweep_path))
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    except (InvalidConfig, TypeError, ValueError) as exc:
        return _fail(EXIT_INVALID, str(exc))

    cells = spec.cells()
    workers = max(1, parallelism or os.cpu_count() or 1)
    results: dict[int, RunMetrics] = {}
    try:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        partial = out / "sweep.csv"
        with partial.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(SWEEP_FIELDS) + "\n")
            fh.flush()

            def done(i: int, m: RunMetrics) -> None:
                results[i] = m
                fh.write(_sweep_line(m, cells[i][1]) + "\n")
                fh.flush()
                log.info("cell %d/%d: n=%d f=%s seed=%d", len(results), len(cells),
                         m.n_vehicles, m.rogue_fraction, cells[i][1])

            if workers == 1:
                for i, (cfg, _) in enumerate(cells):
                    done(i, _run_cell(cfg))
            else:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    futures = {pool.submit(_run_cell, cfg): i for i, (cfg, _) in enumerate(cells)}
                    for fut in as_completed(futures):
                        done(futures[fut], fut.result())

        ordered = [results[i] for i in range(len(cells))]
        lines = [",".join(SWEEP_FIELDS)]
        lines += [_sweep_line(m, cells[i][1]) for i, m in enumerate(ordered)]
        _write(partial, "\n".join(lines) + "\n")
        _write(out / "timing.csv", timing_csv(ordered))
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))
    return EXIT_OK


def _configure_logging() -> None:
    level = os.environ.get("FROUND_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fround", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario config and print it normalized")
    p.add_argument("--config", required=True, metavar="PATH")

    p = sub.add_parser("run", help="run one simulation")
    p.add_argument("--config", required=True, metavar="PATH")
    p.add_argument("--seed", type=int, metavar="U64")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--emit-events", action="store_true", help="also write events.csv (large)")
    p.add_argument("--trace", metavar="PATH", help="replay an imported mobility trace")

    p = sub.add_parser("sweep", help="run the vehicle-count x rogue-fraction x seed grid")
    p.add_argument("--sweep", required=True, metavar="PATH")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--parallel", type=int, metavar="N", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        return cmd_validate(args.config)
    if args.command == "run":
        return cmd_run(args.config, args.seed, args.out, args.emit_events, args.trace)
    return cmd_sweep(args.sweep, args.out, args.parallel)


if __name__ == "__main__":
    sys.exit(main())
