import io
import json

import pandas as pd
import pytest

from pool_planner.main import cli, parse_pools, render_tree
from pool_planner.errors import PoolingError
from pool_planner.strategies import make_strategy


def run(capsys, *argv):
    code = cli(list(argv))
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, *argv):
    code, out = run(capsys, *argv)
    assert code == 0
    return json.loads(out)


def run_csv(capsys, *argv):
    code, out = run(capsys, *argv)
    return code, pd.read_csv(io.StringIO(out))


class TestPlan:
    def test_three_stages(self, capsys):
        doc = run_json(capsys, "plan", "--p", "0.02")
        assert doc["pools"] == [27, 9, 3]
        assert doc["k"] == 3
        assert doc["cost"] == pytest.approx(0.1980, abs=5e-4)
        assert sum(doc["stage_means"]) == pytest.approx(doc["cost"])
        assert doc["tree"].splitlines()[0] == "(1) size 27"

    def test_individual_testing(self, capsys):
        doc = run_json(capsys, "plan", "--p", "0.5")
        assert doc["k"] == 0
        assert doc["pools"] == []
        assert doc["cost"] == 1.0
        assert doc["tree"] == "individual testing"

    def test_exhaustive_agrees(self, capsys):
        conj = run_json(capsys, "plan", "--p", "0.02")
        exh = run_json(capsys, "plan", "--p", "0.02", "--mode", "exhaustive", "--max-pool", "81")
        assert exh["pools"] == conj["pools"]

    def test_four_candidate(self, capsys):
        doc = run_json(capsys, "plan", "--p", "0.1", "--mode", "four_candidate")
        assert doc["pools"] == [9, 3]

    @pytest.mark.parametrize("p", ["0", "1", "-0.1"])
    def test_prevalence_range(self, capsys, p):
        code, out = run(capsys, "plan", "--p", p)
        assert code == 2
        assert out == ""

    def test_unknown_mode(self):
        with pytest.raises(SystemExit) as exc:
            cli(["plan", "--p", "0.1", "--mode", "greedy"])
        assert exc.value.code == 2


class TestCost:
    def test_two_stage(self, capsys):
        doc = run_json(capsys, "cost", "--p", "0.5", "--pools", "4,2")
        assert doc["variance_per_pool"] == pytest.approx(2.484375)
        assert len(doc["stage_means"]) == 3

    def test_long_chain_has_no_variance(self, capsys):
        doc = run_json(capsys, "cost", "--p", "0.1", "--pools", "36,9,3")
        assert doc["variance_per_pool"] is None

    def test_individual(self, capsys):
        doc = run_json(capsys, "cost", "--p", "0.1", "--pools", "")
        assert doc["cost"] == 1.0

    @pytest.mark.parametrize("pools", ["9,4", "3,9", "9,x", "1"])
    def test_bad_chain(self, capsys, pools):
        code, out = run(capsys, "cost", "--p", "0.1", "--pools", pools)
        assert code == 2
        assert out == ""


class TestTables:
    def test_transitions(self, capsys):
        code, frame = run_csv(capsys, "transitions", "--kmax", "4")
        assert code == 0
        assert list(frame.columns) == ["k", "lambda_k", "rho_k_minus_1"]
        assert list(frame["k"]) == [1, 2, 3, 4]
        assert frame["lambda_k"].iloc[0] == pytest.approx(0.1239, abs=1e-4)
        assert frame["rho_k_minus_1"].iloc[0] == pytest.approx(0.3066, abs=1e-4)

    def test_transitions_range(self, capsys):
        code, _ = run(capsys, "transitions", "--kmax", "0")
        assert code == 2

    def test_sweep(self, capsys):
        code, frame = run_csv(capsys, "sweep", "--pmin", "0.001", "--pmax", "0.5", "--points", "40", "--log")
        assert code == 0
        assert list(frame.columns) == ["p", "cost", "k", "family"]
        assert len(frame) == 40
        assert frame["cost"].is_monotonic_increasing
        assert frame["family"].iloc[-1] == "none"
        assert set(frame["family"]) <= {"none", "m33", "m34"}
        assert (frame.loc[frame["family"] == "none", "k"] == 0).all()

    def test_sweep_bad_range(self, capsys):
        code, _ = run(capsys, "sweep", "--pmin", "0.3", "--pmax", "0.2")
        assert code == 2


class TestSimulate:
    def test_reproducible_output(self, capsys):
        argv = ["simulate", "--p", "0.05", "--pools", "27,9,3", "--replications", "20000", "--seed", "5"]
        first = run(capsys, *argv)
        second = run(capsys, *argv)
        assert first == second
        doc = json.loads(first[1])
        assert doc["replications"] == 20000
        assert doc["seed"] == 5

    def test_declared_keys(self, capsys):
        doc = run_json(capsys, "simulate", "--p", "0", "--pools", "9,3", "--replications", "100", "--seed", "7")
        assert set(doc) == {
            "replications",
            "mean_tests_per_pool",
            "mean_tests_per_individual",
            "variance_tests_per_pool",
            "stage_counts",
            "std_error_mean",
            "std_error_variance",
            "seed",
        }
        assert doc["mean_tests_per_pool"] == 1.0

    def test_threads_option(self, capsys):
        argv = ["simulate", "--p", "0.1", "--pools", "9,3", "--replications", "5000"]
        assert run(capsys, "--threads", "1", *argv) == run(capsys, "--threads", "3", *argv)


class TestConjecture:
    def test_single_point(self, capsys):
        code, frame = run_csv(capsys, "conjecture", "--jmin", "10", "--jmax", "10")
        assert code == 0
        assert list(frame.columns) == ["j", "p", "phi", "sign_certified", "winner"]
        assert len(frame) == 1
        assert frame["phi"].iloc[0] < 0
        assert frame["winner"].iloc[0] in ("m33", "m34")

    def test_empty_range(self, capsys):
        code, out = run(capsys, "conjecture", "--jmin", "5", "--jmax", "4")
        assert code == 2
        assert out == ""


class TestLinearize:
    def test_integer_optimum(self, capsys):
        doc = run_json(capsys, "linearize", "--p", "0.01")
        assert doc["L_sharp"] == pytest.approx(0.1251815, abs=1e-6)
        assert [row["k"] for row in doc["integer_comparison"]] == [3, 4]
        assert all(row["L"] >= doc["L_sharp"] for row in doc["integer_comparison"])

    def test_out_of_range(self, capsys):
        code, _ = run(capsys, "linearize", "--p", "0.2")
        assert code == 2


class TestBounds:
    def test_keys(self, capsys):
        doc = run_json(capsys, "bounds", "--p", "0.001")
        assert set(doc) == {"p", "k3", "k3_cost", "optimal_cost", "upper", "lower", "gap_bound"}
        assert doc["lower"] <= doc["optimal_cost"] <= doc["k3_cost"] <= doc["upper"]

    def test_out_of_range(self, capsys):
        code, _ = run(capsys, "bounds", "--p", "0.4")
        assert code == 2


class TestHelpers:
    def test_parse_pools(self):
        assert parse_pools(" 27, 9,3 ") == make_strategy([27, 9, 3])
        assert parse_pools("").k == 0
        with pytest.raises(PoolingError):
            parse_pools("a,b")

    def test_tree_elision(self):
        lines = render_tree(make_strategy([243, 81, 27, 9, 3])).splitlines()
        assert len(lines) == 65
        assert lines[-1] == "... (57 more pools)"
        assert lines[1] == "  (1,1) size 81"

    def test_small_tree(self):
        lines = render_tree(make_strategy([9, 3])).splitlines()
        assert lines == ["(1) size 9", "  (1,1) size 3", "  (1,2) size 3", "  (1,3) size 3"]
