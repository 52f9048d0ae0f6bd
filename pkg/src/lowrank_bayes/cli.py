"""Command-line front end: spectrum, sweep, project, problem emit.

Configuration precedence: built-in defaults, then the --config JSON file, then
explicit flags.  Output files are byte-deterministic for a fixed config+seed.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import bench
from .bayes import problem_to_json
from .errors import InputValidationError, LowRankBayesError
from .measures import DivergenceSpec
from .problems import DeconvolutionConfig, HeatConfig, build_deconvolution, build_heat


def _parse_ranks(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip() != "")
    except ValueError as exc:
        raise InputValidationError(f"cannot parse ranks {text!r}: comma-separated integers") from exc


def _parse_families(text: str) -> tuple[str, ...]:
    return tuple(tok.strip() for tok in text.split(",") if tok.strip() != "")


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputValidationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputValidationError("config file must hold a JSON object")
    return doc


def _build_experiment_config(config_path, **flags) -> bench.ExperimentConfig:
    doc = _load_config_file(config_path)
    merged = {
        "problem": "heat",
        "ranks": (0, 1, 2, 3, 5, 8, 13),
        "families": ("cov", "mean1", "mean2", "joint"),
        "divergence": "kl_reverse",
        "order": None,
        "mc_samples": 0,
        "seed": 0,
        "output": "csv",
        "plot": None,
    }
    for key in merged:
        if key in doc and doc[key] is not None:
            merged[key] = doc[key]
    if "divergence" in doc and isinstance(doc["divergence"], dict):
        merged["divergence"] = doc["divergence"].get("family", "kl_reverse")
        merged["order"] = doc["divergence"].get("order")
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    if merged["divergence"] not in ("renyi", "amari") and flags.get("order") is None:
        merged["order"] = None  # drop a config-file order once the family is overridden
    if isinstance(merged["ranks"], str):
        merged["ranks"] = _parse_ranks(merged["ranks"])
    if isinstance(merged["families"], str):
        merged["families"] = _parse_families(merged["families"])
    spec = DivergenceSpec(family=merged["divergence"], order=merged["order"])
    return bench.ExperimentConfig(
        problem=str(merged["problem"]),
        ranks=tuple(int(r) for r in merged["ranks"]),
        families=tuple(merged["families"]),
        divergence=spec,
        mc_samples=int(merged["mc_samples"]),
        seed=int(merged["seed"]),
        output=str(merged["output"]),
        plot=merged["plot"],
    )


def _emit(text: str, output: str | None):
    if output is None:
        click.echo(text, nl=False)
    else:
        Path(output).write_text(text)


def _run(fn):
    try:
        fn()
    except LowRankBayesError as exc:
        raise click.ClickException(str(exc)) from exc


@click.group()
def main():
    """Optimal low-rank Gaussian posterior approximation for linear inverse problems."""


@main.command()
@click.option("--problem", default=None, help="heat, deconvolution, or a problem JSON path.")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Experiment config JSON; flags override it.")
@click.option("--output", type=click.Path(), default=None, help="Write here instead of stdout.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None)
def spectrum(problem, config_path, output, fmt):
    """Update spectrum: lambda_i, Hessian eigenvalues, variance ratios, rank(H)."""
    def go():
        cfg = _build_experiment_config(config_path, problem=problem, output=fmt)
        report = bench.spectrum_report(cfg)
        text = bench.spectrum_to_csv(report) if cfg.output == "csv" \
            else bench.spectrum_to_json(report)
        _emit(text, output)
        if output is not None:
            click.echo(f"rank_h={report.rank_h}")
    _run(go)


@main.command()
@click.option("--problem", default=None, help="heat, deconvolution, or a problem JSON path.")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Experiment config JSON; flags override it.")
@click.option("--ranks", default=None, help="Comma-separated ranks, e.g. 0,3,10.")
@click.option("--families", default=None, help="Comma-separated subset of cov,mean1,mean2,joint.")
@click.option("--divergence", default=None,
              type=click.Choice(["kl_reverse", "kl_forward", "renyi", "amari", "hellinger"]))
@click.option("--order", type=float, default=None, help="Order in (0,1) for renyi/amari.")
@click.option("--mc-samples", "mc_samples", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--output", type=click.Path(), default=None, help="Write here instead of stdout.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None)
@click.option("--plot", type=click.Path(), default=None, help="Optional SVG of loss vs rank.")
def sweep(problem, config_path, ranks, families, divergence, order, mc_samples, seed,
          output, fmt, plot):
    """Rank sweep of closed-form losses, optionally validated by Monte Carlo."""
    def go():
        cfg = _build_experiment_config(
            config_path, problem=problem, ranks=ranks, families=families,
            divergence=divergence, order=order, mc_samples=mc_samples, seed=seed,
            output=fmt, plot=plot)
        table = bench.run_sweep(cfg)
        text = bench.table_to_csv(table) if cfg.output == "csv" else bench.table_to_json(table)
        _emit(text, output)
        if cfg.plot is not None:
            Path(cfg.plot).write_text(bench.render_loss_plot(table))
    _run(go)


@main.command()
@click.option("--problem", default=None, help="heat, deconvolution, or a problem JSON path.")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--rank", "-r", type=int, required=True)
@click.option("--seed", type=int, default=None)
def project(problem, config_path, rank, seed):
    """Compare the projected problem's exact posterior with (A_r^(2) y, C_r_opt)."""
    def go():
        cfg = _build_experiment_config(config_path, problem=problem, seed=seed)
        cmp_ = bench.project_and_compare(cfg, rank)
        click.echo(f"rank={cmp_.rank}")
        click.echo(f"mean_max_diff={cmp_.mean_max_diff:.17g}")
        click.echo(f"cov_max_diff={cmp_.cov_max_diff:.17g}")
    _run(go)


@main.group()
def problem():
    """Problem-file utilities."""


@problem.command()
@click.option("--kind", type=click.Choice(["heat", "deconvolution"]), required=True)
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Generator config JSON matching the HeatConfig/DeconvolutionConfig fields.")
@click.option("--output", type=click.Path(), default=None, help="Write here instead of stdout.")
def emit(kind, config_path, output):
    """Write the canonical problem JSON for a generator config."""
    def go():
        doc = _load_config_file(config_path)
        if kind == "heat":
            built = build_heat(HeatConfig.from_json_dict(doc))
        else:
            built = build_deconvolution(DeconvolutionConfig.from_json_dict(doc))
        _emit(problem_to_json(built) + "\n", output)
    _run(go)


if __name__ == "__main__":
    sys.exit(main())
