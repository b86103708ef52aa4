import pytest

from csp_weighting.cli import main
from csp_weighting.fixtures import data_path

FIG = str(data_path("six_solution.csp"))
HOM = str(data_path("six_solution_homogeneous.tbl"))
HET = str(data_path("six_solution_heterogeneous.tbl"))
ORD_B = str(data_path("two_minima.ord"))
ORD_C = str(data_path("one_minimum.ord"))
CNF = str(data_path("small.cnf"))


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    rows = [line.split("\t") for line in out.splitlines() if not line.startswith("#")]
    return code, out, err, rows


def value(rows, key):
    return next(r for r in rows if r[0] == key)


def test_weigh_six_solution_homogeneous(capsys):
    code, out, err, rows = run(capsys, "weigh", FIG, HOM, "--homogeneous")
    assert code == 0
    assert float(value(rows, "total")[2]) == pytest.approx(1.48, abs=0.01)
    assert value(rows, "component")[-1] == "PASS"
    assert "conservation PASS" in err
    assert out.startswith("# csp-weighting weigh\tseed=0")


def test_weigh_heterogeneous(capsys):
    code, _, _, rows = run(capsys, "weigh", FIG, HET)
    assert code == 0 and float(value(rows, "total")[2]) == pytest.approx(1.55, abs=0.01)


def test_orient_single_minimum(capsys):
    code, _, _, rows = run(capsys, "orient", FIG, ORD_C)
    assert code == 0
    assert value(rows, "minimal_count")[1] == "1"
    assert value(rows, "minimal")[1] == "ca"


def test_solve_unsat_fixture(capsys):
    code, _, _, rows = run(capsys, "solve", str(data_path("unsat.csp")))
    assert code == 0 and value(rows, "count")[1] == "0"


def test_network_lists_components(capsys):
    code, _, _, rows = run(capsys, "network", FIG)
    assert code == 0
    assert sum(r[0] == "solution" for r in rows) == 6
    assert sum(r[0] == "component" for r in rows) == 1


def test_greedy_and_family(capsys):
    code, _, _, rows = run(capsys, "greedy-order", FIG, HOM, "--homogeneous")
    assert code == 0 and value(rows, "bound")[4] == "1"
    code, _, _, rows = run(capsys, "family-equal", FIG, ORD_B, HOM, "--homogeneous")
    assert code == 0 and value(rows, "equality")[1] == "PASS"
    assert float(value(rows, "gamma")[1]) == pytest.approx(float(value(rows, "minimal_total")[1]))


def test_greedy_rejects_heterogeneous_tables(capsys):
    code, _, err, _ = run(capsys, "greedy-order", FIG, HET)
    assert code == 2 and "PreconditionError" in err


def test_star_weigh_and_core(capsys):
    code, _, _, rows = run(capsys, "star-weigh", CNF, "--rho", "0.3", "--nps")
    assert code == 0 and value(rows, "gamma_at_least_one")[1] == "PASS"
    code, _, _, rows = run(capsys, "core", CNF)
    assert code == 0 and all(r[3] == "PASS" for r in rows[1:])
    code, _, err, _ = run(capsys, "core", CNF, "--solution", "1000")
    assert code == 2


def test_star_weigh_rejects_rho_above_one(capsys):
    code, _, err, _ = run(capsys, "star-weigh", CNF, "--rho", "1.0825")
    assert code == 2 and "PreconditionError" in err


def test_moment_commands(capsys):
    args = ["--n", "8", "--s", "2", "--t", "3", "--p", "0.02", "--rho", "0.7"]
    code, _, _, rows = run(capsys, "moment-eval", *args)
    assert code == 0 and float(value(rows, "relative_difference")[1]) < 1e-10
    code, out, _, rows = run(capsys, "moment-mc", *args, "--trials", "20000", "--seed", "7")
    assert code == 0 and "seed=7" in out.splitlines()[0]
    assert value(rows, "within_3_sigma")[1] == "PASS"
    code, _, err, _ = run(capsys, "moment-eval", "--n", "5", "--s", "4", "--t", "3", "--p", "0.1", "--rho", "0.5")
    assert code == 2 and "ParameterError" in err


def test_sweep_without_plugin_is_a_clear_error(capsys):
    code, _, err, _ = run(capsys, "sweep", "--d-param", "0.0")
    assert code == 2 and "ExternalFormulaRequired" in err
    code, _, err, _ = run(capsys, "contour")
    assert code == 2 and "ExternalFormulaRequired" in err


def test_sweep_and_contour_with_plugin(capsys, tmp_path):
    plugin = tmp_path / "f.py"
    plugin.write_text("def f(alpha, a, r):\n    return 0.0125 - (a - 0.5) ** 2 - (r - 2.0) ** 2\n")
    code, _, _, rows = run(capsys, "sweep", "--d-param", "0.0", "--f-plugin", str(plugin),
                           "--alpha-range", "4.419", "4.419", "--a-range", "0.4", "0.6",
                           "--b-range", "0", "0.05", "--r-range", "1.9", "2.1",
                           "--step", "0.05", "--refine", "0.01")
    assert code == 0
    arg = value(rows, "argmax")
    assert len(arg) == 10 and arg[7] == "yes"
    code, _, _, rows = run(capsys, "contour", "--f-plugin", str(plugin), "--threshold", "0",
                           "--a-range", "0.3", "0.7", "--r-range", "1.8", "2.2", "--step", "0.05")
    assert code == 0
    lo_a, hi_a = (float(v) for v in value(rows, "bounds")[1].split(","))
    assert lo_a == pytest.approx(0.4) and hi_a == pytest.approx(0.6)


def test_sweep_h_only(capsys):
    code, _, _, rows = run(capsys, "sweep", "--objective", "h", "--d-param", "0.1",
                           "--alpha-range", "4.419", "4.419", "--a-range", "0.678206", "0.678206",
                           "--b-range", "0", "0.321794", "--r-range", "1.8", "1.8")
    assert code == 0 and float(value(rows, "argmax")[3]) == pytest.approx(0.01419, abs=1e-4)


def test_reports_are_byte_identical(capsys, tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"r{k}.tsv"
        assert main(["moment-mc", "--n", "8", "--s", "2", "--t", "3", "--p", "0.02", "--rho", "0.7",
                     "--trials", "5000", "--seed", "3", "--output", str(path)]) == 0
        outs.append(path.read_bytes())
    capsys.readouterr()
    assert outs[0] == outs[1]


def test_usage_and_format_errors(capsys, tmp_path):
    assert main(["nonsense"]) == 2
    assert main([]) == 2
    bad = tmp_path / "bad.csp"
    bad.write_text("csp 2\n")
    assert main(["solve", str(bad)]) == 2
    assert main(["solve", str(tmp_path / "missing.csp")]) == 2
    assert main(["solve", FIG, "--cap", "4"]) == 2
    assert main(["--help"]) == 0
    capsys.readouterr()


def test_verification_failure_exit_code(capsys):
    # three trials cannot resolve the expectation: the 3-sigma check fails and exits 1
    code, _, err, rows = run(capsys, "moment-mc", "--n", "8", "--s", "2", "--t", "3", "--p", "0.02",
                             "--rho", "0.7", "--trials", "3", "--seed", "0")
    assert code == 1 and value(rows, "within_3_sigma")[1] == "FAIL"
    assert value(rows, "z_score")[1] != ""
