"""Experiment harness: rank sweeps, Monte Carlo checks, reports, flat-file output.

Monte Carlo draws Y_k = S_y z_k from the counter stream (sample k owns counters
[k n, (k+1) n)), so estimates are independent of batching or parallel schedule.
Per-sample mean losses ||A Y - m_pos(Y)||^2_{C_pos^{-1}} are evaluated through
the spectral tail operator sum_{i>r} d_i^{gamma/2} w_i phi_i^T S_y^{-1}, which
equals S_pos^{-1}(A_r - C_pos G^T C_obs^{-1}) exactly but does not lose the
tail to cancellation when it sits far below the operator scale.  The joint
per-sample loss adds the (data-independent) reverse-KL covariance term, so its
average matches the closed form sum_{j>r} f_kl(d_j) + d_j^gamma.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import approx
from .bayes import InverseProblem, posterior, problem_from_json, spectrum
from .errors import InputValidationError
from .measures import DivergenceSpec, amari_from_renyi, hellinger_from_renyi
from .problems import (
    DeconvolutionConfig,
    HeatConfig,
    build_deconvolution,
    build_heat,
    sample_data,
)
from .rng import CounterRng

FAMILIES = ("cov", "mean1", "mean2", "joint")

CSV_HEADER = "rank,family,divergence,closed_form,mc_estimate,mc_stderr,unique"

_PROBLEM_BUILDERS = {
    "heat": lambda: build_heat(HeatConfig()),
    "deconvolution": lambda: build_deconvolution(DeconvolutionConfig()),
}


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "heat"
    ranks: tuple[int, ...] = (0, 1, 2, 3, 5, 8, 13)
    families: tuple[str, ...] = ("cov", "mean1", "mean2", "joint")
    divergence: DivergenceSpec = field(default_factory=lambda: DivergenceSpec("kl_reverse"))
    mc_samples: int = 0
    seed: int = 0
    output: str = "csv"
    plot: str | None = None

    def __post_init__(self):
        if self.mc_samples < 0:
            raise InputValidationError("mc_samples must be nonnegative")
        if self.output not in ("csv", "json"):
            raise InputValidationError("output must be 'csv' or 'json'")
        for fam in self.families:
            if fam not in FAMILIES:
                raise InputValidationError(
                    f"unknown family {fam!r}; expected subset of {FAMILIES}")


@dataclass(frozen=True)
class LossRow:
    rank: int
    family: str
    closed_form: float
    mc_estimate: float | None
    mc_stderr: float | None
    unique: bool
    lambda_tail_head: float


@dataclass(frozen=True)
class LossTable:
    rows: tuple[LossRow, ...]
    divergence: str
    problem: str
    seed: int
    mc_samples: int


def load_problem(name: str) -> InverseProblem:
    """Resolve a generator name ('heat', 'deconvolution') or a problem JSON path."""
    builder = _PROBLEM_BUILDERS.get(name)
    if builder is not None:
        return builder()
    path = Path(name)
    if not path.exists():
        raise InputValidationError(
            f"problem {name!r} is neither a known generator {sorted(_PROBLEM_BUILDERS)} "
            f"nor an existing file")
    return problem_from_json(path.read_text())


def _loss_direction(div: DivergenceSpec) -> tuple[str, float | None]:
    family = {"kl_reverse": "reverse_kl", "kl_forward": "forward_kl"}.get(div.family, div.family)
    return family, div.order


def _transform(div: DivergenceSpec, base: float) -> float:
    if div.family == "amari":
        return amari_from_renyi(base, div.order)
    if div.family == "hellinger":
        return hellinger_from_renyi(base)
    return base


def _transform_stderr(div: DivergenceSpec, base_mean: float, base_stderr: float) -> float:
    """Delta-method stderr of the Amari/Hellinger transforms of the tail-sum estimate."""
    if div.family == "amari":
        c = div.order * (1.0 - div.order)
        return math.exp(-c * base_mean) * base_stderr
    if div.family == "hellinger":
        value = hellinger_from_renyi(base_mean)
        if value == 0.0:
            return 0.0
        return math.exp(-base_mean) / value * base_stderr
    return base_stderr


def _mean_sample_losses(spec, z: np.ndarray, r: int, family: int) -> np.ndarray:
    """Per-sample ||A_r Y - m_pos(Y)||^2_{C_pos^{-1}} for Y = S_y z, via the spectral tail."""
    k = spec.rank_h
    if r >= k:
        return np.zeros(z.shape[1])
    d_tail = spec.hessian_eigenvalues[r:k]
    kappa = d_tail ** (0.5 * approx.loss_exponent(family))
    proj = spec.phi[:, r:k].T @ z
    return np.sum((kappa[:, None] * proj) ** 2, axis=0)


def run_sweep(cfg: ExperimentConfig) -> LossTable:
    """Closed-form losses per (rank, family), with optional MC estimates."""
    problem = load_problem(cfg.problem)
    spec = spectrum(problem)
    for r in cfg.ranks:
        if not 0 <= r <= problem.n:
            raise InputValidationError(f"rank {r} outside 0..{problem.n}")
    if "joint" in cfg.families and cfg.divergence.family != "kl_reverse":
        raise InputValidationError("the joint family is defined for kl_reverse only")

    z = None
    if cfg.mc_samples > 0:
        flat = CounterRng(cfg.seed, stream=0).normal(0, cfg.mc_samples * problem.n)
        z = flat.reshape(cfg.mc_samples, problem.n).T

    direction, order = _loss_direction(cfg.divergence)
    rows = []
    for family in cfg.families:
        for r in cfg.ranks:
            unique = approx.unique_at_rank(spec.lambdas, r)
            lam_head = float(spec.lambdas[r]) if r < spec.m else 0.0
            cov_reverse = approx.covariance_loss(spec, r, "reverse_kl")
            if family == "cov":
                closed = approx.covariance_loss(spec, r, direction, order)
                mc, stderr = (closed, 0.0) if z is not None else (None, None)
            elif family in ("mean1", "mean2"):
                fam = 1 if family == "mean1" else 2
                closed = approx.mean_divergence_loss(spec, r, fam, cfg.divergence)
                mc = stderr = None
                if z is not None:
                    losses = _mean_sample_losses(spec, z, r, fam)
                    base_mean = float(losses.mean())
                    base_stderr = float(losses.std(ddof=1) / math.sqrt(losses.size)) \
                        if losses.size > 1 else 0.0
                    mc = _transform(cfg.divergence, base_mean)
                    stderr = _transform_stderr(cfg.divergence, base_mean, base_stderr)
            else:  # joint, structure-ignoring mean
                closed = cov_reverse + approx.mean_divergence_loss(spec, r, 2, cfg.divergence)
                mc = stderr = None
                if z is not None:
                    losses = cov_reverse + _mean_sample_losses(spec, z, r, 2)
                    mc = float(losses.mean())
                    stderr = float(losses.std(ddof=1) / math.sqrt(losses.size)) \
                        if losses.size > 1 else 0.0
            rows.append(LossRow(rank=r, family=family, closed_form=closed,
                                mc_estimate=mc, mc_stderr=stderr, unique=unique,
                                lambda_tail_head=lam_head))
    return LossTable(rows=tuple(rows), divergence=cfg.divergence.label(),
                     problem=cfg.problem, seed=cfg.seed, mc_samples=cfg.mc_samples)


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.17g}"


def table_to_csv(table: LossTable) -> str:
    lines = [CSV_HEADER]
    for row in table.rows:
        lines.append(
            f"{row.rank},{row.family},{table.divergence},{_fmt(row.closed_form)},"
            f"{_fmt(row.mc_estimate)},{_fmt(row.mc_stderr)},"
            f"{'true' if row.unique else 'false'}")
    return "\n".join(lines) + "\n"


def table_to_json(table: LossTable) -> str:
    doc = {
        "problem": table.problem,
        "divergence": table.divergence,
        "seed": table.seed,
        "mc_samples": table.mc_samples,
        "rows": [
            {
                "rank": row.rank,
                "family": row.family,
                "closed_form": row.closed_form,
                "mc_estimate": row.mc_estimate,
                "mc_stderr": row.mc_stderr,
                "unique": row.unique,
                "lambda_tail_head": row.lambda_tail_head,
            }
            for row in table.rows
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class SpectrumReport:
    rows: tuple[tuple[int, float, float, float], ...]  # (i, lambda_i, d_i, 1+lambda_i)
    rank_h: int


def spectrum_report(cfg: ExperimentConfig) -> SpectrumReport:
    problem = load_problem(cfg.problem)
    spec = spectrum(problem)
    d = spec.hessian_eigenvalues
    rows = tuple(
        (i + 1, float(spec.lambdas[i]), float(d[i]), float(1.0 + spec.lambdas[i]))
        for i in range(spec.m))
    return SpectrumReport(rows=rows, rank_h=spec.rank_h)


def spectrum_to_csv(report: SpectrumReport) -> str:
    lines = ["index,lambda,hessian_eigenvalue,variance_ratio"]
    for i, lam, d, ratio in report.rows:
        lines.append(f"{i},{lam:.17g},{d:.17g},{ratio:.17g}")
    return "\n".join(lines) + "\n"


def spectrum_to_json(report: SpectrumReport) -> str:
    doc = {
        "rank_h": report.rank_h,
        "rows": [
            {"index": i, "lambda": lam, "hessian_eigenvalue": d, "variance_ratio": ratio}
            for i, lam, d, ratio in report.rows
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class ProjectComparison:
    rank: int
    mean_max_diff: float
    cov_max_diff: float


def project_and_compare(cfg: ExperimentConfig, r: int) -> ProjectComparison:
    """Exact posterior of the rank-r projected problem vs (A_r^{(2)} y, C_r_opt)."""
    problem = load_problem(cfg.problem)
    spec = spectrum(problem)
    if not 0 <= r <= problem.n:
        raise InputValidationError(f"rank {r} outside 0..{problem.n}")
    joint = approx.joint_approximation(spec, problem, 2, r)
    projected = approx.optimal_projector(spec, problem, r)
    y = sample_data(problem, None, cfg.seed)
    pos = posterior(projected.problem, y)
    mean_diff = float(np.abs(pos.mean - joint.mean.a_opt @ y).max())
    cov_diff = float(np.abs(pos.covariance - joint.covariance.covariance).max())
    return ProjectComparison(rank=r, mean_max_diff=mean_diff, cov_max_diff=cov_diff)


# ----------------------------------------------------------------------------
# SVG loss plot (hand-rolled so the bytes are reproducible)

_PALETTE = {"cov": "#1f77b4", "mean1": "#d62728", "mean2": "#2ca02c", "joint": "#9467bd"}
_FLOOR = 1e-18


def render_loss_plot(table: LossTable) -> str:
    """Self-contained SVG of closed-form loss vs rank, log scale on the y axis."""
    width, height = 640, 420
    left, right, top, bottom = 70, 20, 30, 50
    by_family: dict[str, list[tuple[int, float]]] = {}
    for row in table.rows:
        by_family.setdefault(row.family, []).append((row.rank, max(row.closed_form, _FLOOR)))
    ranks = sorted({row.rank for row in table.rows})
    values = [v for pts in by_family.values() for _, v in pts]
    lo = math.floor(math.log10(min(values)))
    hi = math.ceil(math.log10(max(values))) if max(values) > 0 else 0
    if hi <= lo:
        hi = lo + 1
    x0, x1 = min(ranks), max(ranks)
    span = max(x1 - x0, 1)

    def px(rank: float) -> float:
        return left + (rank - x0) / span * (width - left - right)

    def py(value: float) -> float:
        frac = (math.log10(value) - lo) / (hi - lo)
        return height - bottom - frac * (height - top - bottom)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">rank</text>',
        f'<text x="16" y="{height / 2:.1f}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13" transform="rotate(-90 16 {height / 2:.1f})">'
        f'{table.divergence} loss</text>',
    ]
    for exp in range(lo, hi + 1):
        y = py(10.0 ** exp)
        parts.append(f'<line x1="{left}" y1="{y:.2f}" x2="{width - right}" y2="{y:.2f}" '
                     f'stroke="#dddddd" stroke-width="1"/>')
        parts.append(f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">1e{exp}</text>')
    for rank in ranks:
        x = px(rank)
        parts.append(f'<line x1="{x:.2f}" y1="{height - bottom}" x2="{x:.2f}" '
                     f'y2="{height - bottom + 4}" stroke="#333333" stroke-width="1"/>')
        parts.append(f'<text x="{x:.2f}" y="{height - bottom + 18}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{rank}</text>')
    parts.append(f'<rect x="{left}" y="{top}" width="{width - left - right}" '
                 f'height="{height - top - bottom}" fill="none" stroke="#333333"/>')
    legend_y = top + 14
    for family in sorted(by_family):
        pts = sorted(by_family[family])
        color = _PALETTE.get(family, "#333333")
        coords = " ".join(f"{px(r):.2f},{py(v):.2f}" for r, v in pts)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                     f'stroke-width="1.8"/>')
        for r, v in pts:
            parts.append(f'<circle cx="{px(r):.2f}" cy="{py(v):.2f}" r="2.6" fill="{color}"/>')
        parts.append(f'<line x1="{width - right - 120}" y1="{legend_y}" '
                     f'x2="{width - right - 96}" y2="{legend_y}" stroke="{color}" '
                     f'stroke-width="1.8"/>')
        parts.append(f'<text x="{width - right - 90}" y="{legend_y + 4}" '
                     f'font-family="sans-serif" font-size="12">{family}</text>')
        legend_y += 16
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
