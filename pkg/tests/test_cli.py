import json
from pathlib import Path

import pytest

from mechdelin import DistributionSpec, Valuation, ValuationProfile
from mechdelin.cli import build_parser, config_to_argv, main, run
from mechdelin.io import (
    distribution_from_json,
    distribution_to_json,
    mechanism_from_json,
    mechanism_to_json,
    profile_from_json,
    profile_to_json,
    samples_from_json,
    samples_to_json,
)
from mechdelin.mechanisms import MechanismClass
from mechdelin.report import RunRecord, emit_report, render
from mechdelin.valuations import CostFunction

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def test_partition_tariff_example():
    rec = run(json.loads((CONFIGS / "tariff_partition.json").read_text()), CONFIGS)
    assert rec.summary["hyperplanes"] == 10
    sigs = {json.loads(r["demand_signature"])[0][0] for r in rec.rows}
    assert sigs == {0, 1, 2, 3, 4}
    assert max(r["affine_residual"] for r in rec.rows if not r["thin"]) < 1e-9


def test_bound_example(capsys):
    assert main(["run", str(CONFIGS / "bound_example.json"), "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["summary"]["epsilon"] == pytest.approx(0.1240, abs=5e-5)


def test_bad_distribution_exit_code(tmp_path, capsys):
    dist = write(tmp_path / "d.json", {"atoms": [{"prob": 0.7, "profile": {"buyers": [{"kind": "additive", "values": [1]}]}},
                                                 {"prob": 0.7, "profile": {"buyers": [{"kind": "additive", "values": [2]}]}}]})
    assert main(["sample", "--distribution", dist, "--N", "3"]) == 2
    assert "distribution.atoms" in capsys.readouterr().err


def test_missing_field_named(tmp_path, capsys):
    dist = write(tmp_path / "d.json", {"atoms": [{"profile": {"buyers": [{"kind": "additive", "values": [1]}]}}]})
    assert main(["sample", "--distribution", dist, "--N", "3"]) == 2
    assert "atoms[0].prob" in capsys.readouterr().err


def test_resource_limit_exit_code(tmp_path, capsys):
    prof = {"buyers": [{"kind": "additive", "values": [1, 2, 3, 4]}]}
    samples = write(tmp_path / "s.json", {"profiles": [prof] * 3})
    code = main(["erm", "--class", "item_pricing", "--samples", samples, "--method", "grid",
                 "--resolution", "1e-4"])
    assert code == 3
    assert capsys.readouterr().err.startswith("resource limit")


class TestReport:
    def test_empty_rows(self):
        assert render(RunRecord("erm", {}, []), "csv") == "\n"

    def test_identical_emissions(self, tmp_path):
        rec = RunRecord("bound", {"U": 1}, [{"a": 0.1, "b": [1, 2]}], {"x": 1.0}, 0.5)
        for fmt in ("csv", "json", "md"):
            assert emit_report(rec, fmt, tmp_path / f"a.{fmt}") == emit_report(rec, fmt, tmp_path / f"b.{fmt}")
            assert (tmp_path / f"a.{fmt}").read_bytes() == (tmp_path / f"b.{fmt}").read_bytes()

    def test_json_header(self):
        doc = json.loads(render(RunRecord("bound", {"U": 1}, [], {}), "json"))
        assert {"command", "config_hash", "version", "config", "summary", "rows", "wall_time"} <= set(doc)


def test_spm_markdown_one_row_per_level(tmp_path, capsys):
    samples = tmp_path / "s.json"
    assert main(["sample", "--distribution", str(CONFIGS / "inputs/two_group_distribution.json"),
                 "--N", "40", "--out", str(samples)]) == 0
    capsys.readouterr()
    hierarchy = json.loads((CONFIGS / "inputs/group_hierarchy.json").read_text())
    assert main(["spm", "--hierarchy", str(CONFIGS / "inputs/group_hierarchy.json"), "--samples", str(samples),
                 "--distribution", str(CONFIGS / "inputs/two_group_distribution.json"), "--format", "md"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2 + len(hierarchy["partitions"])
    assert lines[0].startswith("| level |")


@pytest.mark.parametrize("workers", [1, 4])
def test_same_seed_same_csv(tmp_path, workers):
    cfg = json.loads((CONFIGS / "tariff_gap.json").read_text())
    cfg.update(trials=5, N=20)
    outs = []
    for k, w in enumerate((1, workers)):
        rec = run({**cfg, "workers": w}, CONFIGS)
        outs.append(render(rec, "csv"))
    assert outs[0] == outs[1]


def test_cli_csv_matches_across_runs(tmp_path):
    args = ["run", str(CONFIGS / "tariff_sample.json"), "--format", "csv"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("path", sorted((CONFIGS / "acceptance").glob("*.json")), ids=lambda p: p.stem)
def test_acceptance_configs_parse(path):
    cfg = json.loads(path.read_text())
    args = build_parser().parse_args(config_to_argv(cfg, path.parent))
    assert args.command == "check" and args.name == cfg["name"]


def test_cheap_check_through_cli(capsys):
    assert main(["run", str(CONFIGS / "acceptance/04_lower_bound.json")]) == 0


class TestIO:
    def test_profile_round_trip(self):
        p = ValuationProfile((Valuation.additive([1.0, 2.5]), Valuation.unit_demand([3.0, 0.5])))
        assert profile_from_json(profile_to_json(p)) == p

    def test_general_round_trip(self):
        p = ValuationProfile((Valuation.from_units([6, 9, 11, 12]),))
        assert profile_from_json(json.loads(json.dumps(profile_to_json(p)))) == p

    def test_distribution_round_trip(self):
        d = DistributionSpec(((ValuationProfile((Valuation.additive([1.0]),)), 0.3),
                              (ValuationProfile((Valuation.additive([2.0]),)), 0.7)))
        back = distribution_from_json(json.loads(json.dumps(distribution_to_json(d))))
        assert back.atoms == d.atoms

    def test_product_round_trip(self):
        d = DistributionSpec.product([[((1.0,), 0.25), ((3.0,), 0.75)], [((2.0,), 1.0)]])
        back = distribution_from_json(distribution_to_json(d))
        assert back.item_independent and back.marginals == d.marginals

    def test_mechanism_round_trip(self):
        mc = MechanismClass("item_pricing", n=2, m=2, cost=CostFunction.additive([0.5, 1.0]))
        raw = mechanism_to_json(mc, [1, 2])
        back, params = mechanism_from_json(json.loads(json.dumps(raw)))
        assert back == mc and params == [1.0, 2.0]

    def test_samples_round_trip(self):
        profs = [ValuationProfile((Valuation.additive([float(k)]),)) for k in range(4)]
        assert samples_from_json(samples_to_json(profs, seed=3)) == profs
