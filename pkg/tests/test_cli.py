import json

import pytest

from segsim.cli import cli_main
from segsim.snapshot import snapshot_read


def run_cli(*argv):
    return cli_main(list(argv))


class TestRun:
    def test_report_snapshot_trace(self, tmp_path):
        report = tmp_path / "r.json"
        snap = tmp_path / "s.bin"
        trace = tmp_path / "t.csv"
        code = run_cli(
            "run", "--n", "24", "--w", "1", "--tau", "0.45", "--p", "0.5",
            "--seed", "3", "--allow-small", "--record-interval", "5",
            "--sample-size", "16",
            "--report-out", str(report), "--snapshot-out", str(snap),
            "--trace-out", str(trace),
        )
        assert code == 0
        doc = json.loads(report.read_text())
        assert doc["termination_reason"] == "NoEligibleAgents"
        assert doc["config"]["K"] == 5
        assert doc["provenance"]["rng_id"] == "pcg64"
        assert doc["region_summary"]["sample_size"] >= 16
        state = snapshot_read(snap.read_bytes())
        assert state.unhappy_count() == 0
        lines = trace.read_text().strip().splitlines()
        assert lines[0].startswith("# provenance: ")
        assert lines[1] == "flip_index,continuous_time,lyapunov,eligible"
        assert len(lines) > 2

    def test_identical_seeds_identical_bytes(self, tmp_path):
        outs = []
        for name in ("a.json", "b.json"):
            path = tmp_path / name
            code = run_cli(
                "run", "--n", "24", "--w", "1", "--tau", "0.45", "--seed", "9",
                "--allow-small", "--omit-timing", "--sample-size", "8",
                "--report-out", str(path),
            )
            assert code == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]

    def test_engines_agree_byte_for_byte(self, tmp_path):
        outs = []
        for name, extra in (("numba.json", []), ("python.json", ["--python-engine"])):
            path = tmp_path / name
            code = run_cli(
                "run", "--n", "32", "--w", "2", "--tau", "0.45", "--seed", "13",
                "--omit-timing", "--sample-size", "16", "--report-out", str(path),
                *extra,
            )
            assert code == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]

    def test_config_error_exit_code(self):
        assert run_cli("run", "--n", "4", "--w", "2", "--tau", "0.45") == 2

    def test_usage_error_exit_code(self):
        assert run_cli("run", "--bogus") == 2


class TestSweepCommand:
    def test_sweep_runs(self, tmp_path):
        spec = {
            "tau_grid": [0.45],
            "w_grid": [1],
            "n_grid": [16],
            "p_grid": [1.0],
            "replicates": 2,
            "base_seed": 5,
            "sample_size": 8,
            "out_dir": str(tmp_path / "out"),
        }
        cfg_path = tmp_path / "spec.json"
        cfg_path.write_text(json.dumps(spec))
        assert run_cli("sweep", "--config", str(cfg_path)) == 0
        assert (tmp_path / "out" / "sweep.csv").exists()
        assert (tmp_path / "out" / "sweep_spec.json").exists()


class TestDetect:
    def test_detect_on_generated_state(self, tmp_path):
        out = tmp_path / "d.json"
        code = run_cli(
            "detect", "--n", "64", "--w", "2", "--tau", "0.4", "--seed", "11",
            "--what", "radical,unhappy,expandable,firewall",
            "--eps-prime", "0.35", "--r", "8", "--out", str(out),
        )
        assert code == 0
        doc = json.loads(out.read_text())
        kinds = [d["kind"] for d in doc["detections"]]
        assert kinds == ["radical", "unhappy", "expandable", "firewall"]
        expand = doc["detections"][2]
        assert isinstance(expand["witness"], list)

    def test_detect_blocks_and_chemical_path(self, tmp_path):
        out = tmp_path / "d.json"
        code = run_cli(
            "detect", "--n", "64", "--w", "1", "--tau", "0.45", "--seed", "2",
            "--what", "blocks,chemical-path", "--m", "2", "--r-blocks", "3",
            "--out", str(out),
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["detections"][0]["dims"] == 32
        assert "found" in doc["detections"][1]

    def test_detect_regions(self, tmp_path):
        out = tmp_path / "d.json"
        code = run_cli(
            "detect", "--n", "32", "--w", "1", "--tau", "0.45", "--seed", "6",
            "--what", "regions", "--sample-size", "16", "--out", str(out),
        )
        assert code == 0
        doc = json.loads(out.read_text())
        entry = doc["detections"][0]
        assert entry["kind"] == "regions"
        assert entry["mean_Mprime"] >= entry["mean_M"]
        assert entry["largest_plus"] is not None

    def test_detect_expansion(self, tmp_path):
        out = tmp_path / "d.json"
        code = run_cli(
            "detect", "--n", "48", "--w", "2", "--tau", "0.45", "--seed", "4",
            "--what", "expansion", "--region-radius", "5", "--out", str(out),
        )
        assert code == 0
        doc = json.loads(out.read_text())
        entry = doc["detections"][0]
        assert entry["kind"] == "expansion"
        assert "is_region_of_expansion" in entry

    def test_detect_snapshot_input(self, tmp_path):
        snap = tmp_path / "s.bin"
        run_cli(
            "run", "--n", "24", "--w", "1", "--tau", "0.45", "--seed", "3",
            "--allow-small", "--sample-size", "0", "--snapshot-out", str(snap),
        )
        out = tmp_path / "d.json"
        code = run_cli(
            "detect", "--snapshot", str(snap), "--what", "radical", "--out", str(out)
        )
        assert code == 0

    def test_detect_needs_input(self):
        assert run_cli("detect", "--what", "radical") == 2


class TestTheoryCommand:
    def test_f_curve(self, tmp_path):
        out = tmp_path / "f.csv"
        code = run_cli(
            "theory", "--curve", "f", "--tau-from", "0.35", "--tau-to", "0.5",
            "--step", "0.005", "--out", str(out),
        )
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("# provenance: ")
        assert lines[1] == "tau,value,finite_N_value"
        assert len(lines) == 33
        last = lines[-1].split(",")
        assert float(last[0]) == pytest.approx(0.5)
        assert float(last[1]) == pytest.approx(0.0, abs=1e-9)

    def test_pu_curve_requires_n(self, tmp_path):
        code = run_cli(
            "theory", "--curve", "pu", "--tau-from", "0.4", "--tau-to", "0.45",
            "--step", "0.05",
        )
        assert code == 2


class TestPercolationCommand:
    def test_chemdist_csv(self, tmp_path):
        out = tmp_path / "c.csv"
        code = run_cli(
            "percolation", "--mode", "chemdist", "--p", "0.95", "--seed", "1",
            "--samples", "3", "--dims", "40,40", "--a", "5,5", "--b", "30,30",
            "--out", str(out),
        )
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("# provenance: ")
        assert lines[1] == "sample,connected,distance,l1"
        assert len(lines) == 5

    def test_circuit_csv(self, tmp_path):
        out = tmp_path / "c.csv"
        code = run_cli(
            "percolation", "--mode", "circuit", "--p", "0.95", "--seed", "1",
            "--samples", "3", "--dims", "61,61", "--r-inner", "6",
            "--r-outer", "18", "--out", str(out),
        )
        assert code == 0
        assert len(out.read_text().strip().splitlines()) == 5

    def test_fpp_csv(self, tmp_path):
        out = tmp_path / "f.csv"
        code = run_cli(
            "percolation", "--mode", "fpp", "--samples", "2", "--k", "30",
            "--half-width", "10", "--seed", "4", "--out", str(out),
        )
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[1] == "sample,k,passage_time"

    def test_radius_csv(self, tmp_path):
        out = tmp_path / "r.csv"
        code = run_cli(
            "percolation", "--mode", "radius", "--p", "0.2", "--samples", "2",
            "--dims", "30,30", "--seed", "4", "--out", str(out),
        )
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[1] == "sample,radius"
        assert len(lines) == 2 + 2 * 900


class TestStatsCommand:
    def test_lemma_a1(self, tmp_path):
        out = tmp_path / "s.json"
        code = run_cli(
            "stats", "--test", "lemmaA1", "--N", "441", "--c", "2",
            "--samples", "20000", "--seed", "2", "--out", str(out),
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["passed"] is True

    def test_prop1(self, tmp_path):
        out = tmp_path / "s.json"
        code = run_cli(
            "stats", "--test", "prop1", "--N", "441", "--gamma", "0.25",
            "--tau", "0.45", "--c", "2", "--samples", "5000", "--seed", "2",
            "--out", str(out),
        )
        assert code == 0

    def test_conditioning_too_rare_is_config_error(self):
        code = run_cli(
            "stats", "--test", "prop1", "--N", "441", "--gamma", "0.25",
            "--tau", "0.2", "--c", "2", "--samples", "5000", "--seed", "2",
        )
        assert code == 2

    def test_pu_match(self, tmp_path):
        out = tmp_path / "s.json"
        code = run_cli(
            "stats", "--test", "pu-match", "--n", "256", "--w", "1",
            "--tau", "0.5", "--seed", "1", "--out", str(out),
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["test_id"] == "pu_match"

    def test_fig2_trend_runs(self, tmp_path):
        out = tmp_path / "s.json"
        code = run_cli(
            "stats", "--test", "fig2-trend", "--n", "32", "--w", "1",
            "--taus", "0.38,0.42", "--replicates", "2", "--sample-size", "8",
            "--seed", "3", "--out", str(out),
        )
        doc = json.loads(out.read_text())
        assert doc["test_id"] == "fig2_trend"
        assert code in (0, 1)  # verdict-dependent exit

    def test_missing_n_for_prop1(self):
        assert run_cli("stats", "--test", "prop1") == 2
