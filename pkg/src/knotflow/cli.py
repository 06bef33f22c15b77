"""Command-line front end: single runs, verdict-table sweeps, exports.

Exit codes: 0 on success, 1 when the flow itself fails (aborted step), 2 on
configuration errors.  Sweep cells run in separate processes; the worker
count comes from KNOTFLOW_WORKERS (default 1, which also guarantees bitwise
reproducible artifacts).
"""

from __future__ import annotations

import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from .config import (
    ConfigError,
    RunConfig,
    SweepConfig,
    load_run_config,
    load_sweep_config,
    max_edge,
)
from .flow import FlowAborted, initial_record, initial_state, run as run_flow
from .tangent_point import NonEmbeddedError
from .storage import (
    export_curve,
    load_snapshot,
    save_snapshot,
    write_energy_csv,
)

EXIT_OK = 0
EXIT_FLOW = 1
EXIT_CONFIG = 2


def cmd_run(config: RunConfig) -> int:
    """Execute one seeded run, writing energy.csv and snapshots."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    curve = config.build_curve()
    params = config.flow_params(curve)
    save_snapshot(out / "snapshot_000000.json", curve, step=0, seed=config.seed)

    records = []
    status = EXIT_OK
    abort_step = None
    state = None
    try:
        state = initial_state(curve, params, seed=config.seed)
        records.append(initial_record(state, params))
    except NonEmbeddedError:
        # source curve rejected by the energy assembly itself
        abort_step = 0
        status = EXIT_FLOW

    done = 0
    while status == EXIT_OK and done < config.n_steps:
        chunk = min(config.snapshot_every, config.n_steps - done)
        try:
            state, recs = run_flow(state, params, chunk)
        except FlowAborted as exc:
            records.extend(exc.records)
            abort_step = exc.step_index
            status = EXIT_FLOW
            break
        records.extend(recs)
        done += chunk
        save_snapshot(
            out / f"snapshot_{state.step_index:06d}.json",
            state.curve,
            step=state.step_index,
            seed=config.seed,
        )

    write_energy_csv(out / "energy.csv", records)
    final_curve = curve if state is None else state.curve
    final_step = 0 if state is None else state.step_index
    save_snapshot(
        out / "final_state.json",
        final_curve,
        step=final_step,
        seed=config.seed,
        extra={"aborted_at": abort_step} if abort_step is not None else None,
    )
    if abort_step is not None:
        click.echo(f"flow aborted at step {abort_step}", err=True)
    return status


def _sweep_cell(args: tuple[int, RunConfig]) -> dict:
    """One grid cell in its own process; never raises."""
    index, cell = args
    row = {
        "kappa": cell.kappa,
        "rho": cell.rho,
        "n": cell.n,
        "tau_rule": cell.tau_rule,
        "tau": None,
        "stable": None,
        "isotopy_ok": None,
        "error": "",
    }
    try:
        curve = cell.build_curve()
        params = cell.flow_params(curve)
        row["tau"] = params.tau
        state = initial_state(curve, params, seed=cell.seed)
        try:
            state, records = run_flow(state, params, cell.n_steps)
            row["stable"] = all(r.stable for r in records)
            row["isotopy_ok"] = all(r.isotopy_ok for r in records)
        except FlowAborted as exc:
            # an aborted cell failed both monitors by construction
            row["stable"] = False
            row["isotopy_ok"] = False
            row["error"] = f"aborted at step {exc.step_index}"
    except Exception as exc:  # noqa: BLE001 - cell isolation
        row["error"] = str(exc)
    return row


def _verdict(value: bool | None) -> str:
    if value is None:
        return "-"
    return "yes" if value else "no"


def _sweep_tables(sweep: SweepConfig, rows: list[dict]) -> tuple[str, str]:
    """(csv, markdown) verdict tables; markdown mirrors the block layout."""
    csv_lines = ["kappa,rho,n,tau_rule,tau,stable,isotopy_ok,error"]
    for r in rows:
        tau = "" if r["tau"] is None else f"{r['tau']:.17g}"
        csv_lines.append(
            f"{r['kappa']:.17g},{r['rho']:.17g},{r['n']},{r['tau_rule']},"
            f"{tau},{_verdict(r['stable'])},{_verdict(r['isotopy_ok'])},"
            f"{r['error']}"
        )

    md_lines = []
    by_block: dict[tuple[float, float], list[dict]] = {}
    for r in rows:
        by_block.setdefault((r["kappa"], r["rho"]), []).append(r)
    for (kappa, rho), block in by_block.items():
        md_lines.append(f"**kappa={kappa:g}, rho={rho:g}** (stab., isot.)")
        md_lines.append("")
        rules = list(dict.fromkeys(r["tau_rule"] for r in block))
        md_lines.append("| n | " + " | ".join(rules) + " |")
        md_lines.append("|---" * (len(rules) + 1) + "|")
        for n in dict.fromkeys(r["n"] for r in block):
            cells = []
            for rule in rules:
                match = [
                    r for r in block if r["n"] == n and r["tau_rule"] == rule
                ]
                if match:
                    r = match[0]
                    cells.append(
                        f"{_verdict(r['stable'])}, {_verdict(r['isotopy_ok'])}"
                    )
                else:
                    cells.append("-")
            md_lines.append(f"| {n} | " + " | ".join(cells) + " |")
        md_lines.append("")
    return "\n".join(csv_lines) + "\n", "\n".join(md_lines)


def cmd_sweep(sweep: SweepConfig) -> int:
    """Run the whole verdict grid and write sweep.csv / sweep.md."""
    out = Path(sweep.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = list(enumerate(sweep.cells()))
    workers = int(os.environ.get("KNOTFLOW_WORKERS", "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(c) for c in cells]

    csv_text, md_text = _sweep_tables(sweep, rows)
    (out / "sweep.csv").write_text(csv_text)
    (out / "sweep.md").write_text(md_text + "\n")
    click.echo(md_text)
    return EXIT_OK


def cmd_export(source: str | Path, fmt: str, out: str | Path | None) -> int:
    curve, _ = load_snapshot(source)
    if out is None:
        out = Path(source).with_suffix(f".{fmt}")
    main_file, attr_file = export_curve(Path(out), curve, fmt)
    click.echo(str(main_file))
    if attr_file is not None:
        click.echo(str(attr_file))
    return EXIT_OK


@click.group()
def main():
    """Relaxation runs for self-avoiding elastic curves."""


@main.command(name="run")
@click.option(
    "--config", "config_path", required=True, type=click.Path(), help="JSON run config"
)
def run_command(config_path):
    try:
        config = load_run_config(config_path)
        status = cmd_run(config)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    sys.exit(status)


@main.command(name="sweep")
@click.option(
    "--config", "config_path", required=True, type=click.Path(), help="JSON sweep config"
)
def sweep_command(config_path):
    try:
        sweep = load_sweep_config(config_path)
        status = cmd_sweep(sweep)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    sys.exit(status)


@main.command(name="export")
@click.option("--in", "source", required=True, type=click.Path(), help="snapshot JSON")
@click.option(
    "--format", "fmt", default="obj", type=click.Choice(["obj", "csv"])
)
@click.option("--out", "out", default=None, type=click.Path())
def export_command(source, fmt, out):
    try:
        status = cmd_export(source, fmt, out)
    except (ValueError, OSError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    sys.exit(status)


@main.command(name="serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve_command(host, port):
    """Run the session service for the companion UI."""
    import uvicorn

    from .server import create_app

    uvicorn.run(create_app(), host=host, port=port)
