"""Command-line front end.

Subcommands mirror the service operations: ingest files, train, run one
window, evaluate against the consumption benchmark, preview a strictness
sweep, seed the demo fixture, and serve HTTP. Exit codes: 0 on success,
1 on an operational error (printed as ``Code: message``), 2 on usage
errors.
"""

from __future__ import annotations

import json
import os
import re
import sys
import tempfile
from functools import wraps

import click

from .errors import SentinelError
from .pipeline import electricity_eval, quantile_sweep, sweep_evt
from .records import ReportStore
from .service import Service, ServiceConfig, load_config, serve
from .timeutil import parse_rfc3339

__all__ = ["main"]

_DURATION_RE = re.compile(r"^(\d+)([smhdw])$")
_DURATION_UNIT_S = {"s": 1, "m": 60, "h": 3600, "d": 86400, "w": 604800}


def _parse_duration(text: str) -> float:
    m = _DURATION_RE.match(text.strip())
    if not m:
        raise click.UsageError(
            f"duration must look like 7d, 24h, 30m, or 3600s; got {text!r}"
        )
    return int(m.group(1)) * _DURATION_UNIT_S[m.group(2)]


def _parse_inject(spec: str) -> dict:
    known = {
        "count": ("n_spikes", int),
        "mag": ("spike_sigma", float),
        "decoys": ("n_decoys", int),
        "decoy_mag": ("decoy_sigma", float),
        "seed": ("seed", int),
    }
    out: dict = {}
    for token in spec.split(","):
        token = token.strip()
        if not token:
            continue
        if "=" not in token:
            raise click.UsageError(f"inject spec entries are key=value; got {token!r}")
        name, raw = token.split("=", 1)
        if name not in known:
            raise click.UsageError(
                f"unknown inject key {name!r}; known: {', '.join(sorted(known))}"
            )
        target, conv = known[name]
        try:
            out[target] = conv(raw)
        except ValueError:
            raise click.UsageError(f"bad value for inject key {name!r}: {raw!r}")
    return out


def _operational(fn):
    """Map library errors to exit code 1 with a stable ``Code: message`` line."""

    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SentinelError as e:
            click.echo(f"{e.code}: {e}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
def main():
    """Two-stage streaming anomaly detection over metric series."""


@main.command()
@click.argument("files", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Service config JSON; defaults honor SENTINEL_CONFIG.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@_operational
def ingest(files, config_path, as_json):
    """Load metric envelope documents into the series store."""
    service = Service(load_config(config_path))
    results = []
    for path in files:
        with open(path, "rb") as fh:
            summary = service.ingest_document(fh.read())
        summary["file"] = path
        results.append(summary)
    if as_json:
        click.echo(json.dumps(results))
    else:
        for r in results:
            click.echo(f"{r['file']}: {r['series']} series, {r['points']} points")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--metric", default=None, help="Only train on series with this metric name.")
@click.option("--window", default=None, help="Training span, e.g. 7d (default from config).")
@click.option("--end", default=None, help="RFC3339 end of the training span (default now).")
@click.option("--json", "as_json", is_flag=True)
@_operational
def train(config_path, metric, window, end, as_json):
    """Fit the configured forecaster on stored series and persist it."""
    config = load_config(config_path)
    if window is not None:
        from dataclasses import replace

        config = replace(config, training_window_s=_parse_duration(window))
    service = Service(config)
    report = service.train(
        end=parse_rfc3339(end) if end else None,
        metric=metric,
    )
    payload = {
        "epochs_run": report.epochs_run,
        "final_loss": report.final_loss,
        "n_series": report.n_series,
        "wall_time_s": report.wall_time_s,
        "model_path": config.model_path,
    }
    if as_json:
        click.echo(json.dumps(payload))
    else:
        click.echo(
            f"trained on {report.n_series} series in {report.wall_time_s:.2f}s "
            f"(final loss {report.final_loss:.4f}) -> {config.model_path}"
        )


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--window", required=True, help="RFC3339 start of the inference window.")
@click.option("--json", "as_json", is_flag=True)
@_operational
def infer(config_path, window, as_json):
    """Run and commit one detection window."""
    service = Service(load_config(config_path))
    try:
        start = parse_rfc3339(window)
    except ValueError as e:
        raise click.UsageError(f"--window must be RFC3339: {e}")
    outcome = service.run_window_at(start)
    funnel = outcome.result.funnel
    if as_json:
        payload = funnel.to_json()
        payload["calibrated_on_context"] = outcome.calibrated_on_context
        click.echo(json.dumps(payload))
    else:
        click.echo(
            f"window {funnel.window_id}: {funnel.points_total} points -> "
            f"{funnel.stage1_count} screened -> {funnel.high_count} high / "
            f"{funnel.low_count} low (z_q={funnel.z_q})"
        )


@main.command("eval")
@click.option("--dataset", default="electricity", show_default=True)
@click.option("--file", "file_path", type=click.Path(exists=True), default=None,
              help="Consumption file; omitted, a deterministic synthetic one is used.")
@click.option("--customers", default=20, show_default=True)
@click.option("--inject", "inject_spec", default="count=10,mag=10", show_default=True)
@click.option("--context-hours", default=168, show_default=True)
@click.option("--detect-hours", default=24, show_default=True)
@click.option("--file-seed", default=42, show_default=True,
              help="Seed for the synthetic file when --file is omitted.")
@_operational
def eval_cmd(dataset, file_path, customers, inject_spec, context_hours, detect_hours, file_seed):
    """Injection benchmark on a consumption dataset; prints JSON."""
    if dataset != "electricity":
        raise click.UsageError(f"unknown dataset {dataset!r}; available: electricity")
    kwargs = _parse_inject(inject_spec)
    tmp = None
    if file_path is None:
        from .synthetic import write_electricity_file

        tmp = tempfile.TemporaryDirectory()
        file_path = os.path.join(tmp.name, "LD-synth.txt")
        days = (context_hours + detect_hours) // 24 + 1
        write_electricity_file(file_path, n_customers=customers, n_days=days, seed=file_seed)
    try:
        run = electricity_eval(
            file_path,
            n_customers=customers,
            context_hours=context_hours,
            detect_hours=detect_hours,
            **kwargs,
        )
    finally:
        if tmp is not None:
            tmp.cleanup()
    payload = run.eval.to_json()
    payload["funnel"] = run.result.funnel.to_json()
    click.echo(json.dumps(payload))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--grid", required=True, help="Comma-separated quantiles, e.g. 0.99,0.998")
@click.option("--window", default=None,
              help="Committed window id (default: most recent).")
@click.option("--scores", "scores_path", type=click.Path(exists=True), default=None,
              help="Score file (one float per line) instead of a stored window.")
@click.option("--json", "as_json", is_flag=True)
@_operational
def sweep(config_path, grid, window, scores_path, as_json):
    """Preview extreme-tier counts over a strictness grid (CSV by default)."""
    try:
        quantiles = [float(tok) for tok in grid.split(",") if tok.strip()]
    except ValueError as e:
        raise click.UsageError(f"--grid must be comma-separated numbers: {e}")
    if not quantiles:
        raise click.UsageError("--grid must name at least one quantile")

    if scores_path is not None:
        with open(scores_path, "r", encoding="utf-8") as fh:
            scores = [float(line) for line in fh if line.strip()]
        config = load_config(config_path)
        rows = quantile_sweep(scores, sweep_evt(config.evt, len(scores)), quantiles)
    else:
        config = load_config(config_path)
        service = Service(config)
        if window is None:
            committed = service.report_store.committed_windows()
            if not committed:
                raise click.UsageError("no committed windows; pass --scores or --window")
            window = committed[-1]
        rows = service.sweep_report(window, quantiles)

    if as_json:
        click.echo(json.dumps(rows))
    else:
        click.echo("quantile,risk_q,z_q,high_count")
        for row in rows:
            click.echo(f"{row['quantile']},{row['risk_q']},{row['z_q']},{row['high_count']}")


@main.command("synth-electricity")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--customers", default=20, show_default=True)
@click.option("--days", default=9, show_default=True)
@click.option("--seed", default=42, show_default=True)
@_operational
def synth_electricity(out_path, customers, days, seed):
    """Write a synthetic consumption file in the benchmark's format."""
    from .synthetic import write_electricity_file

    write_electricity_file(out_path, n_customers=customers, n_days=days, seed=seed)
    click.echo(f"wrote {customers} customers x {days} days to {out_path}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--json", "as_json", is_flag=True)
@_operational
def fixture(config_path, as_json):
    """Seed the demo window (8 extreme / 141 ordinary records) into the stores."""
    from .fixtures import seed_fixture

    config = load_config(config_path)
    out = seed_fixture(config.series_store, config.report_store, config.model_path,
                       risk_q=config.evt.risk_q, band_z=config.band.z)
    if as_json:
        click.echo(json.dumps(out))
    else:
        verb = "seeded" if out["seeded"] else "already present"
        click.echo(f"fixture window {out['window_id']} {verb}: "
                   f"{out['high']} high / {out['low']} low")


@main.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--fixture", "with_fixture", is_flag=True,
              help="Seed the demo window before serving.")
@_operational
def serve_cmd(config_path, with_fixture):
    """Run the HTTP service (scheduler included unless disabled in config)."""
    config = load_config(config_path)
    if with_fixture:
        from .fixtures import seed_fixture

        out = seed_fixture(config.series_store, config.report_store, config.model_path,
                           risk_q=config.evt.risk_q, band_z=config.band.z)
        click.echo(f"fixture window {out['window_id']}: "
                   f"{out['high']} high / {out['low']} low", err=True)
    serve(config)


if __name__ == "__main__":
    main()
