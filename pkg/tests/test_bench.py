import json
import math

import numpy as np
import pytest

import lowrank_bayes as lb
from lowrank_bayes import bench
from conftest import scalar_problem


def write_scalar_problem(tmp_path):
    path = tmp_path / "scalar.json"
    path.write_text(lb.problem_to_json(scalar_problem()))
    return str(path)


class TestRunSweep:
    def test_closed_form_only(self):
        cfg = bench.ExperimentConfig(problem="deconvolution", ranks=(0, 2, 4),
                                     families=("cov", "mean1"), mc_samples=0)
        table = bench.run_sweep(cfg)
        assert len(table.rows) == 6
        assert all(row.mc_estimate is None and row.mc_stderr is None for row in table.rows)

    def test_closed_form_nonincreasing_per_family(self):
        cfg = bench.ExperimentConfig(problem="deconvolution", ranks=tuple(range(17)))
        table = bench.run_sweep(cfg)
        for family in cfg.families:
            losses = [row.closed_form for row in table.rows if row.family == family]
            assert all(a >= b - 1e-15 for a, b in zip(losses, losses[1:]))

    def test_scalar_mean2_mc(self, tmp_path):
        # E = 1 with stderr about sqrt(2)/sqrt(N)
        path = write_scalar_problem(tmp_path)
        cfg = bench.ExperimentConfig(problem=path, ranks=(0,), families=("mean2",),
                                     mc_samples=100000, seed=0)
        row = bench.run_sweep(cfg).rows[0]
        assert row.closed_form == pytest.approx(1.0, abs=1e-14)
        assert abs(row.mc_estimate - 1.0) <= 3 * row.mc_stderr
        assert row.mc_stderr == pytest.approx(math.sqrt(2.0) / math.sqrt(100000), rel=0.05)

    def test_heat_mc_within_three_stderr(self):
        cfg = bench.ExperimentConfig(problem="heat", ranks=(0, 3, 10),
                                     families=("mean1", "mean2", "joint"),
                                     mc_samples=20000, seed=0)
        for row in bench.run_sweep(cfg).rows:
            assert abs(row.mc_estimate - row.closed_form) <= 3 * max(row.mc_stderr, 1e-300) \
                or row.mc_estimate == row.closed_form

    def test_cov_family_mc_is_exact_constant(self):
        cfg = bench.ExperimentConfig(problem="deconvolution", ranks=(0, 3),
                                     families=("cov",), mc_samples=100, seed=1)
        for row in bench.run_sweep(cfg).rows:
            assert row.mc_estimate == row.closed_form
            assert row.mc_stderr == 0.0

    def test_joint_requires_reverse_kl(self):
        cfg = bench.ExperimentConfig(problem="deconvolution", ranks=(0,),
                                     families=("joint",),
                                     divergence=lb.DivergenceSpec("hellinger"))
        with pytest.raises(lb.InputValidationError):
            bench.run_sweep(cfg)

    def test_rank_out_of_range(self):
        cfg = bench.ExperimentConfig(problem="deconvolution", ranks=(17,))
        with pytest.raises(lb.InputValidationError):
            bench.run_sweep(cfg)

    def test_hellinger_closed_form_and_mc_transform(self, tmp_path):
        path = write_scalar_problem(tmp_path)
        cfg = bench.ExperimentConfig(problem=path, ranks=(0,), families=("mean2",),
                                     divergence=lb.DivergenceSpec("hellinger"),
                                     mc_samples=50000, seed=3)
        row = bench.run_sweep(cfg).rows[0]
        assert row.closed_form == pytest.approx(math.sqrt(2 * (1 - math.exp(-1))), abs=1e-12)
        assert abs(row.mc_estimate - row.closed_form) <= 4 * row.mc_stderr

    def test_unknown_family_rejected(self):
        with pytest.raises(lb.InputValidationError):
            bench.ExperimentConfig(families=("cov", "median",))

    def test_lambda_tail_head_column(self):
        cfg = bench.ExperimentConfig(problem="deconvolution", ranks=(0, 5),
                                     families=("cov",))
        table = bench.run_sweep(cfg)
        spec = lb.spectrum(bench.load_problem("deconvolution"))
        assert table.rows[0].lambda_tail_head == spec.lambdas[0]
        assert table.rows[1].lambda_tail_head == spec.lambdas[5]


class TestOutputs:
    def test_csv_schema_and_determinism(self):
        cfg = bench.ExperimentConfig(problem="deconvolution", ranks=(0, 2),
                                     families=("cov", "mean2"), mc_samples=500, seed=9)
        first = bench.table_to_csv(bench.run_sweep(cfg))
        second = bench.table_to_csv(bench.run_sweep(cfg))
        assert first == second
        lines = first.strip().split("\n")
        assert lines[0] == "rank,family,divergence,closed_form,mc_estimate,mc_stderr,unique"
        assert len(lines) == 5
        cell = lines[1].split(",")
        assert cell[1] == "cov" and cell[2] == "kl_reverse" and cell[6] in ("true", "false")
        # 17 significant digits round-trip
        assert float(cell[3]) == bench.run_sweep(cfg).rows[0].closed_form

    def test_json_roundtrip(self):
        cfg = bench.ExperimentConfig(problem="deconvolution", ranks=(0, 1),
                                     families=("mean1",))
        text = bench.table_to_json(bench.run_sweep(cfg))
        doc = json.loads(text)
        assert doc["divergence"] == "kl_reverse"
        assert len(doc["rows"]) == 2
        assert doc["rows"][0]["mc_estimate"] is None

    def test_plot_svg(self):
        cfg = bench.ExperimentConfig(problem="deconvolution", ranks=(0, 2, 4, 8))
        table = bench.run_sweep(cfg)
        svg = bench.render_loss_plot(table)
        assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
        assert svg.count("<polyline") == len(cfg.families)
        assert bench.render_loss_plot(table) == svg


class TestSpectrumReport:
    def test_scalar_row(self, tmp_path):
        path = write_scalar_problem(tmp_path)
        report = bench.spectrum_report(bench.ExperimentConfig(problem=path))
        assert report.rank_h == 1
        i, lam, d, ratio = report.rows[0]
        assert (i, lam, d, ratio) == (1, pytest.approx(-0.5), pytest.approx(1.0),
                                      pytest.approx(0.5))

    def test_zero_problem(self, tmp_path):
        p = lb.InverseProblem(g=np.zeros((2, 3)), noise_cov=np.eye(2),
                              prior=lb.SpectralPrior(np.ones(3)))
        path = tmp_path / "zero.json"
        path.write_text(lb.problem_to_json(p))
        report = bench.spectrum_report(bench.ExperimentConfig(problem=str(path)))
        assert report.rank_h == 0
        assert all(lam == 0.0 and ratio == 1.0 for _, lam, _, ratio in report.rows)

    def test_ratios_match_variance_reduction(self, heat_problem, heat_spectrum):
        report = bench.spectrum_report(bench.ExperimentConfig(problem="heat"))
        for i in (1, 2, 5):
            direct = lb.variance_reduction(heat_spectrum, heat_problem, i)
            assert report.rows[i - 1][3] == pytest.approx(direct, abs=1e-10)

    def test_csv_layout(self):
        report = bench.spectrum_report(bench.ExperimentConfig(problem="deconvolution"))
        lines = bench.spectrum_to_csv(report).strip().split("\n")
        assert lines[0] == "index,lambda,hessian_eigenvalue,variance_ratio"
        assert len(lines) == 65


class TestProjectAndCompare:
    def test_full_rank_matches_exact_posterior(self):
        # deconvolution has rank(H) = n, so r = n reproduces the exact posterior
        cfg = bench.ExperimentConfig(problem="deconvolution", seed=2)
        cmp_ = bench.project_and_compare(cfg, 16)
        assert cmp_.mean_max_diff <= 1e-10
        assert cmp_.cov_max_diff <= 1e-10

    def test_rank_zero_gives_prior(self, tmp_path):
        path = write_scalar_problem(tmp_path)
        cfg = bench.ExperimentConfig(problem=path, seed=2)
        p = scalar_problem()
        projd = lb.optimal_projector(lb.spectrum(p), p, 0)
        y = lb.sample_data(p, None, 2)
        pos = lb.posterior(projd.problem, y)
        assert pos.covariance[0, 0] == pytest.approx(1.0, abs=1e-14)
        assert pos.mean[0] == 0.0
        cmp_ = bench.project_and_compare(cfg, 0)
        assert cmp_.cov_max_diff <= 1e-12

    def test_heat_default(self):
        cfg = bench.ExperimentConfig(problem="heat", seed=4)
        cmp_ = bench.project_and_compare(cfg, 3)
        assert cmp_.mean_max_diff <= 1e-10
        assert cmp_.cov_max_diff <= 1e-10

    def test_rank_validation(self):
        with pytest.raises(lb.InputValidationError):
            bench.project_and_compare(bench.ExperimentConfig(problem="deconvolution"), 99)


class TestLoadProblem:
    def test_unknown_name(self):
        with pytest.raises(lb.InputValidationError):
            bench.load_problem("warp-drive")

    def test_known_generators(self):
        assert bench.load_problem("heat").n == 20
        assert bench.load_problem("deconvolution").n == 16
