"""Command-line surface: search, certify, test, baselines, timing, export.

Exit codes: 0 success, 1 a proof or measurement failed, 2 usage or config
error.  Reports are JSON on stdout (or to --output); fronts also export as
CSV.  Every artifact embeds the code version and a hash of the effective
configuration so results stay traceable to what produced them.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import click

from . import __version__, bench as bench_mod, certify as certify_mod
from .baselines import BaselineSpec, build_baseline
from .config import BenchSettings, ExperimentConfig
from .evaluation import precision_report
from .export import front_csv, front_json, load_archive
from .graphs import ArithmeticMode, count_operations, parse, serialize
from .search import load_checkpoint, run_worker_pool, save_checkpoint
from .targets import get_target


def _params_stamp(params: dict) -> dict:
    canon = json.dumps(params, sort_keys=True, separators=(",", ":"), default=str)
    return {"config_hash": hashlib.sha256(canon.encode()).hexdigest()[:16],
            "code_version": __version__}


def _emit(report: dict, output: str | None) -> None:
    text = json.dumps(report, indent=2) + "\n"
    if output:
        Path(output).write_text(text)
    else:
        click.echo(text, nl=False)


def _load_program(path: str, coeffs: tuple[float, ...]):
    try:
        graph = parse(Path(path).read_text())
    except OSError as exc:
        raise click.UsageError(f"cannot read program file: {exc}")
    except ValueError as exc:
        raise click.UsageError(f"bad program file {path}: {exc}")
    k = len(graph.free_coefficients)
    if k != len(coeffs):
        if k > 0 and not coeffs:
            raise click.UsageError(
                f"program has {k} free coefficients; pass them with --coeff")
        if coeffs:
            raise click.UsageError(
                f"program has {k} free coefficients, got {len(coeffs)} --coeff values")
    return graph, (tuple(coeffs) if coeffs else None)


def _target_or_usage(name: str):
    try:
        return get_target(name)
    except ValueError as exc:
        raise click.UsageError(str(exc))


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Discover, test, benchmark, and certify arithmetic approximations."""


@main.command()
@click.option("--config", "-c", "config_path", type=click.Path(exists=True),
              help="Experiment config JSON; defaults apply when omitted.")
@click.option("--seed", "seeds", type=int, multiple=True,
              help="Override the config's seed list (repeatable).")
@click.option("--output", "-o", "output_dir", type=click.Path(), default=None,
              help="Override the config's output directory.")
@click.option("--resume", is_flag=True,
              help="Continue from each run directory's checkpoint if present.")
def search(config_path, seeds, output_dir, resume):
    """Run the evolutionary search; write archives and best programs."""
    try:
        cfg = ExperimentConfig.load(config_path) if config_path else ExperimentConfig()
        if seeds:
            cfg = cfg.model_copy(update={"seeds": tuple(seeds)})
        if output_dir:
            cfg = cfg.model_copy(update={"output_dir": output_dir})
        cfg = ExperimentConfig.model_validate(cfg.model_dump())
    except (ValueError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"bad config: {exc}")

    for seed in cfg.seeds:
        run_dir = Path(cfg.output_dir) / f"search-{cfg.target}-{cfg.mode}-seed{seed}"
        run_dir.mkdir(parents=True, exist_ok=True)
        cfg.save(run_dir / "config.json")
        checkpoint = run_dir / "checkpoint.json"
        broker = None
        if resume and checkpoint.exists():
            broker = load_checkpoint(str(checkpoint))
        result = run_worker_pool(cfg.search_config(seed), broker=broker)
        if broker is not None:
            save_checkpoint(broker, str(checkpoint))
        else:
            checkpoint.write_text(json.dumps(
                {"capacity": cfg.search.buffer_capacity, "buffer": result.population,
                 "archive": result.archive, "evaluations": result.evaluations}))
        archive_doc = {"stamp": cfg.stamp(), "target": cfg.target, "seed": seed,
                       "evaluations": result.evaluations, "archive": result.archive}
        (run_dir / "archive.json").write_text(json.dumps(archive_doc, indent=2) + "\n")
        buckets: dict[int, dict] = {}
        for rec in result.archive:
            c = int(rec["complexity"])
            if c not in buckets or rec["precision"] > buckets[c]["precision"]:
                buckets[c] = rec
        for c, rec in sorted(buckets.items()):
            from .evaluation import record_to_program

            ep = record_to_program(rec)
            (run_dir / f"best-{c}op.txt").write_text(serialize(ep.bound_graph()) + "\n")
        click.echo(json.dumps({"stamp": cfg.stamp(), "seed": seed,
                               "evaluations": result.evaluations,
                               "archive_size": len(result.archive),
                               "run_dir": str(run_dir)}))


@main.command()
@click.argument("program_file", type=click.Path(exists=True))
@click.option("--target", "-t", required=True)
@click.option("--epsilon", "-e", type=float, required=True)
@click.option("--domain", nargs=2, type=float, default=None,
              help="Override the proof domain [LO, HI].")
@click.option("--coeff", "coeffs", type=float, multiple=True,
              help="Free-coefficient values, in order (repeatable).")
@click.option("--max-depth", type=int, default=96, show_default=True)
@click.option("--max-leaves", type=int, default=10_000_000, show_default=True)
@click.option("--certificate", "cert_path", type=click.Path(), default=None,
              help="Write a machine-checkable certificate here when Proven.")
@click.option("--output", "-o", type=click.Path(), default=None)
def certify(program_file, target, epsilon, domain, coeffs, max_depth, max_leaves,
            cert_path, output):
    """Prove a relative-error bound for a program, or fail with a witness."""
    graph, coeff_vals = _load_program(program_file, coeffs)
    tgt = _target_or_usage(target)
    if epsilon <= 0:
        raise click.UsageError("epsilon must be positive")
    lo, hi = domain if domain else tgt.domain
    try:
        limits = certify_mod.ProofLimits(max_depth=max_depth, max_leaves=max_leaves)
        result = certify_mod.prove_bound(graph, coeff_vals, tgt, lo, hi, epsilon, limits)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    report = {"stamp": _params_stamp({"cmd": "certify", "program": Path(program_file).name,
                                      "target": tgt.name, "epsilon": epsilon,
                                      "domain": [lo, hi], "max_depth": max_depth,
                                      "max_leaves": max_leaves}),
              "status": result.status, "target": result.target, "epsilon": epsilon,
              "domain": list(result.domain), "subintervals": result.subintervals,
              "max_depth_reached": result.max_depth_reached, "witness": result.witness}
    if result.proven and cert_path:
        certify_mod.write_certificate(cert_path, result, graph, coeff_vals)
        report["certificate_file"] = cert_path
    _emit(report, output)
    if not result.proven:
        sys.exit(1)


@main.command("check-certificate")
@click.argument("certificate_file", type=click.Path(exists=True))
@click.option("--output", "-o", type=click.Path(), default=None)
def check_certificate(certificate_file, output):
    """Independently re-verify every leaf of a stored certificate."""
    try:
        cert = json.loads(Path(certificate_file).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"cannot read certificate: {exc}")
    try:
        result = certify_mod.check_certificate(cert)
    except certify_mod.CertificateError as exc:
        _emit({"status": "Failed", "reason": str(exc)}, output)
        sys.exit(1)
    _emit({"stamp": _params_stamp({"cmd": "check-certificate",
                                   "file": Path(certificate_file).name}),
           "status": result.status, "target": result.target,
           "epsilon": result.epsilon, "subintervals": result.subintervals}, output)


@main.command()
@click.option("--target", "-t", required=True)
@click.option("--family", "-f", required=True,
              help="TaylorHorner, Pade, Chebyshev, CFracEuler, CFracGauss, "
                   "CFracMacon, PolyMinimax, or RationalMinimaxImported.")
@click.option("--order", "-m", type=int, default=0, show_default=True)
@click.option("--center", type=float, default=None)
@click.option("--interval", nargs=2, type=float, default=None)
@click.option("--coeff-file", type=click.Path(), default=None,
              help="Coefficient file for RationalMinimaxImported.")
@click.option("--grid-size", type=int, default=10_000, show_default=True)
@click.option("--program-out", type=click.Path(), default=None,
              help="Also write the program text here.")
@click.option("--output", "-o", type=click.Path(), default=None)
def baseline(target, family, order, center, interval, coeff_file, grid_size,
             program_out, output):
    """Construct a classical baseline and report its measured error."""
    tgt = _target_or_usage(target)
    try:
        spec = BaselineSpec(family=family, order=order, center=center,
                            interval=tuple(interval) if interval else None,
                            coeff_file=coeff_file)
        graph = build_baseline(tgt, spec)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    report = precision_report(graph, None, tgt, ArithmeticMode.REAL64,
                              grid_size=grid_size)
    text = serialize(graph)
    if program_out:
        Path(program_out).write_text(text + "\n")
    _emit({"stamp": _params_stamp({"cmd": "baseline", "target": tgt.name,
                                   "family": family, "order": order, "center": center,
                                   "interval": interval, "grid_size": grid_size}),
           "family": family, "order": order, "operations": count_operations(graph),
           "program": text, "report": report}, output)


@main.command()
@click.argument("program_file", type=click.Path(exists=True))
@click.option("--target", "-t", required=True)
@click.option("--mode", type=click.Choice(["real64", "float32"]), default="real64",
              show_default=True)
@click.option("--grid-size", type=int, default=10_000_000, show_default=True)
@click.option("--exhaustive", is_flag=True,
              help="Every binary32 input in the domain (float32 mode only).")
@click.option("--coeff", "coeffs", type=float, multiple=True)
@click.option("--output", "-o", type=click.Path(), default=None)
def test(program_file, target, mode, grid_size, exhaustive, coeffs, output):
    """Measure a program's max error on a grid (or exhaustively)."""
    graph, coeff_vals = _load_program(program_file, coeffs)
    tgt = _target_or_usage(target)
    if exhaustive and mode != "float32":
        raise click.UsageError("--exhaustive requires --mode float32")
    report = precision_report(graph, coeff_vals, tgt, ArithmeticMode(mode),
                              grid_size=grid_size, exhaustive=exhaustive)
    report["stamp"] = _params_stamp({"cmd": "test", "program": Path(program_file).name,
                                     "target": tgt.name, "mode": mode,
                                     "grid_size": grid_size, "exhaustive": exhaustive})
    _emit(report, output)


def _bench_config(config_path, full):
    if config_path:
        try:
            raw = json.loads(Path(config_path).read_text())
            settings = BenchSettings.model_validate(
                raw.get("bench", raw) if isinstance(raw, dict) else raw)
            return settings.build()
        except (ValueError, json.JSONDecodeError) as exc:
            raise click.UsageError(f"bad bench config: {exc}")
    return bench_mod.BenchConfig() if full else bench_mod.BenchConfig.reduced()


@main.command("bench")
@click.argument("program_file", type=click.Path(exists=True))
@click.option("--config", "-c", "config_path", type=click.Path(exists=True),
              help="Bench settings JSON (or an experiment config with a bench block).")
@click.option("--full", is_flag=True, help="Full-size measurement instead of reduced.")
@click.option("--coeff", "coeffs", type=float, multiple=True)
@click.option("--output", "-o", type=click.Path(), default=None)
def bench_cmd(program_file, config_path, full, coeffs, output):
    """Measure program throughput (evaluations per second)."""
    graph, coeff_vals = _load_program(program_file, coeffs)
    cfg = _bench_config(config_path, full)
    try:
        report = bench_mod.benchmark_report(graph, coeff_vals, cfg)
    except bench_mod.BenchmarkIntegrityError as exc:
        _emit({"status": "Failed", "reason": str(exc)}, output)
        sys.exit(1)
    report["stamp"] = _params_stamp({"cmd": "bench", "program": Path(program_file).name,
                                     "config": report["config"]})
    report["nondeterministic"] = True
    _emit(report, output)


@main.command()
@click.argument("program_a", type=click.Path(exists=True))
@click.argument("program_b", type=click.Path(exists=True))
@click.option("--config", "-c", "config_path", type=click.Path(exists=True))
@click.option("--full", is_flag=True)
@click.option("--ratios", type=int, default=9, show_default=True)
@click.option("--output", "-o", type=click.Path(), default=None)
def compare(program_a, program_b, config_path, full, ratios, output):
    """Interleaved speed comparison of two programs."""
    ga, _ = _load_program(program_a, ())
    gb, _ = _load_program(program_b, ())
    cfg = _bench_config(config_path, full)
    if ratios < 1:
        raise click.UsageError("--ratios must be >= 1")
    try:
        stats = bench_mod.compare_interleaved((ga, None), (gb, None), cfg, ratios=ratios)
    except bench_mod.BenchmarkIntegrityError as exc:
        _emit({"status": "Failed", "reason": str(exc)}, output)
        sys.exit(1)
    stats["stamp"] = _params_stamp({"cmd": "compare", "a": Path(program_a).name,
                                    "b": Path(program_b).name, "ratios": ratios})
    stats["nondeterministic"] = True
    _emit(stats, output)


@main.command("export-front")
@click.argument("archive_file", type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True)
@click.option("--output", "-o", type=click.Path(), default=None)
def export_front(archive_file, fmt, output):
    """Flatten an archive into (cost, precision) pairs for plotting."""
    try:
        records = load_archive(archive_file)
    except (OSError, ValueError, json.JSONDecodeError, KeyError) as exc:
        raise click.UsageError(f"cannot read archive: {exc}")
    stamp = _params_stamp({"cmd": "export-front", "file": Path(archive_file).name})
    if fmt == "csv":
        text = front_csv(records)
        if output:
            Path(output).write_text(text)
        else:
            click.echo(text, nl=False)
    else:
        _emit(front_json(records, stamp), output)


if __name__ == "__main__":
    main()
