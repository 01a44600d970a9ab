"""Command-line entry points: run one scenario, a batch, or a report.

Exit codes: 0 success, 2 configuration/schema error, 3 runtime fault.
"""

from __future__ import annotations

import dataclasses
import glob as globmod
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from ..netsim import WireError
from .metrics import report as build_report
from .scenario import ScenarioError, load_scenario
from .sim import SimFault, Simulation

EXIT_CONFIG = 2
EXIT_FAULT = 3


@click.group()
def main():
    """Wearable-network traffic-safety simulator."""


@main.command("run")
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(exists=False), help="Scenario JSON file.")
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory.")
@click.option("--disable-advisories", is_flag=True, help="Baseline mode: detect only.")
@click.option("--disable-plausibility", is_flag=True, help="Admit every decodable message.")
@click.option("--channel-profile", default=None, help="Override the scenario channel profile.")
@click.option("--dump-coordinator", is_flag=True, help="Write per-tick coordinator state.")
def run_cmd(scenario_path, seed, out_dir, disable_advisories, disable_plausibility,
            channel_profile, dump_coordinator):
    """Run one scenario and write trace.jsonl + summary.json."""
    try:
        scenario = load_scenario(scenario_path)
        if seed is not None:
            scenario = dataclasses.replace(scenario, seed=seed)
    except ScenarioError as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        metrics = Simulation(
            scenario, out_dir,
            channel_profile_name=channel_profile,
            disable_advisories=disable_advisories,
            disable_plausibility=disable_plausibility,
            dump_coordinator=dump_coordinator,
        ).run()
    except KeyError as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    except (SimFault, WireError) as e:
        click.echo(f"runtime fault: {e}", err=True)
        sys.exit(EXIT_FAULT)
    click.echo(f"run complete: collisions={metrics.collisions} "
               f"advisories={metrics.advisories_issued} "
               f"trace_sha256={metrics.trace_sha256[:16]}…")


def _run_one(args: tuple[str, str]) -> str:
    path, out_dir = args
    scenario = load_scenario(path)
    Simulation(scenario, out_dir).run()
    return out_dir


@main.command("batch")
@click.option("--scenarios", "pattern", required=True, help="Glob of scenario JSON files.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Parallel workers; runs stay independent and deterministic.")
def batch_cmd(pattern, out_dir, jobs):
    """Run every scenario matching the glob into per-run subdirectories."""
    paths = sorted(globmod.glob(pattern))
    if not paths:
        click.echo(f"config error: no scenarios match {pattern!r}", err=True)
        sys.exit(EXIT_CONFIG)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    work = [(p, str(out / Path(p).stem)) for p in paths]
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for done in pool.map(_run_one, work):
                    click.echo(f"done {done}")
        else:
            for args in work:
                click.echo(f"done {_run_one(args)}")
    except ScenarioError as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    except (SimFault, WireError) as e:
        click.echo(f"runtime fault: {e}", err=True)
        sys.exit(EXIT_FAULT)


@main.command("report")
@click.option("--in", "in_dir", required=True, type=click.Path(exists=False))
@click.option("--format", "fmt", type=click.Choice(["csv", "text"]), default="text",
              show_default=True)
def report_cmd(in_dir, fmt):
    """Aggregate run summaries under a directory."""
    try:
        csv_text, human_text = build_report(in_dir)
    except (ValueError, OSError) as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(csv_text if fmt == "csv" else human_text, nl=False)


if __name__ == "__main__":
    main()
