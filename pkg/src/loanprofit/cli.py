"""Command line: ``loanprofit synth | train | evaluate``.

Exit codes: 0 success, 2 usage or configuration error, 3 schema or data
error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
import time
from pathlib import Path

from . import __version__
from .config import build_pipeline_config, read_config_file
from .dataset import GeneratorConfig, generate_synthetic, load_csv, split, write_csv, write_rejects
from .errors import ConfigError, DataError, LoanProfitError
from .evaluation import evaluate, write_reports
from .gbdt import set_threads
from .pipeline import ONE_STAGE, TWO_STAGE, ProfitPipeline

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_IO = 4
THREADS_ENV = "LOANPROFIT_THREADS"

logger = logging.getLogger("loanprofit")


class UsageError(LoanProfitError):
    pass


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _run_manifest(command, started, **fields) -> dict:
    return {
        "command": command,
        "toolkit_version": __version__,
        "python": platform.python_version(),
        "started_unix": started,
        "elapsed_seconds": round(time.time() - started, 3),
        **fields,
    }


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_synth(args) -> int:
    started = time.time()
    if args.n < 1:
        raise UsageError(f"--n must be >= 1, got {args.n}")
    cfg = GeneratorConfig(default_rate=args.default_rate)
    table = generate_synthetic(args.n, args.seed, cfg)
    out = Path(args.out)
    write_csv(table, out)
    manifest = _run_manifest(
        "synth", started, seeds={"generator": args.seed}, outputs=[str(out)], rows=len(table),
        config_hash=hashlib.sha256(json.dumps(cfg.__dict__, sort_keys=True).encode()).hexdigest(),
        output_sha256=_sha256(out),
    )
    _write_json(out.with_name(out.name + ".manifest.json"), manifest)
    print(f"wrote {len(table)} loans to {out}")
    return EXIT_OK


def _overrides(pairs):
    values = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def cmd_train(args) -> int:
    started = time.time()
    values = read_config_file(args.config) if args.config else {}
    values.update(_overrides(args.set))
    if args.mode:
        values["mode"] = args.mode
    config = build_pipeline_config(values)

    table = load_csv(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if table.rejects:
        write_rejects(table.rejects, out / "rejects.csv")
    train, test = split(table, config.split)
    pipe = ProfitPipeline.from_config(config).fit(train)
    test_rmse = None
    if len(test):
        from .evaluation import rmse

        test_rmse = rmse(pipe.predict(test), test.arr)
    run = _run_manifest(
        "train", started,
        inputs={"data": str(Path(args.data)), "config": str(args.config) if args.config else None},
        data_sha256=_sha256(Path(args.data)),
        row_counts={"loaded": len(table), "dropped_intermediate": table.dropped_intermediate,
                    "rejected": len(table.rejects), "train": len(train), "test": len(test)},
        test_rmse=test_rmse,
    )
    pipe.save(out, extra_manifest={"run": run})
    print(f"mode={config.mode} train={len(train)} test={len(test)} test_rmse={test_rmse:.6f}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    started = time.time()
    dirs = [args.pipeline] + ([args.pipeline_b] if args.pipeline_b else [])
    pipes = [ProfitPipeline.load(d) for d in dirs]
    table = load_csv(args.data)
    if args.no_split:
        held_out = table
    else:
        spec = pipes[0].config.split
        if len(pipes) > 1 and pipes[1].config.split != spec:
            logger.warning("pipelines were trained with different splits; using the first one's held-out set")
        _, held_out = split(table, spec)
    if args.k_max < 1 or args.k_max > len(held_out):
        raise UsageError(f"--k-max must be between 1 and the {len(held_out)} held-out loans")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for name, pipe in zip(("model_a", "model_b"), pipes):
        scores = pipe.score_loans(held_out)
        scores.to_csv(out / f"scores_{name}.csv")
        reports.append(evaluate(scores, held_out, args.k_max, name=name))
    paths = write_reports(reports, held_out, out)
    run = _run_manifest(
        "evaluate", started,
        inputs={"pipelines": [str(d) for d in dirs], "data": str(Path(args.data))},
        modes=[p.mode for p in pipes],
        config_hashes=[p.config.digest() for p in pipes],
        seeds=[p.manifest_.get("seeds") for p in pipes],
        row_counts={"loaded": len(table), "held_out": len(held_out)},
        k_max=args.k_max,
        outputs=sorted(p.name for p in paths.values()),
    )
    _write_json(out / "manifest.json", run)
    sys.stdout.write(paths["report.txt"].read_text(encoding="utf-8"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loanprofit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=int, default=None,
                        help=f"worker threads for training (default: ${THREADS_ENV} or all cores)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic loan table")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--default-rate", type=float, default=GeneratorConfig.default_rate)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="split, fit and persist a pipeline")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None, help="key = value configuration file")
    p.add_argument("--mode", choices=(ONE_STAGE, TWO_STAGE), default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a configuration key")
    p.add_argument("--out", required=True, help="pipeline directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score held-out loans and write the report files")
    p.add_argument("--pipeline", required=True)
    p.add_argument("--pipeline-b", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--k-max", type=int, default=50)
    p.add_argument("--no-split", action="store_true", help="treat the whole file as held-out data")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = args.threads if args.threads is not None else os.environ.get(THREADS_ENV)
    try:
        set_threads(int(threads) if threads is not None else None)
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"loanprofit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"loanprofit: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"loanprofit: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"loanprofit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
