"""Regenerate the golden fixtures for the frontend test suite.

Runs the engine CLI on three small scenarios, snapshots the bundles and a
certificate grid, and records the strategy rankings the CLI produces when
re-run with alternative metric weights (the contract the browser's
client-side recomposition must reproduce).

Usage: python3 frontend/scripts/make_golden.py
"""

import json
import shutil
import sys
import tempfile
from pathlib import Path

from concord import jsonio
from concord.cli import main as cli_main

GOLDEN = Path(__file__).resolve().parent.parent / "test" / "golden"

LENDING_WEIGHTS = [
    {
        "Accuracy": 0.6,
        "Precision": 0.0,
        "Demographic_Parity": 0.4,
        "Total_Profit": 0.0,
        "Total_Loss": 0.0,
        "Percent_Grant": 0.0,
        "Percent_Grant_Lower": 0.0,
    },
    {
        "Accuracy": 0.0,
        "Precision": 0.2,
        "Demographic_Parity": 0.2,
        "Total_Profit": 0.5,
        "Total_Loss": 0.1,
        "Percent_Grant": 0.0,
        "Percent_Grant_Lower": 0.0,
    },
]

HEALTH_WEIGHTS = [
    {
        "Percentage_Treated": 0.0,
        "Avg_outcome_difference": 1.0,
        "Mean_outcome_treated": 0.0,
        "Mean_outcome_control": 0.0,
        "Total_Cognitive_Score": 0.0,
        "Cost_Effectiveness": 0.0,
    },
    {
        "Percentage_Treated": 0.0,
        "Avg_outcome_difference": 0.3,
        "Mean_outcome_treated": 0.3,
        "Mean_outcome_control": 0.2,
        "Total_Cognitive_Score": 0.0,
        "Cost_Effectiveness": 0.2,
    },
]

CASES = [
    ("lending0", {"name": "lending", "n_rows": 240, "seed": 0, "variant": "balanced"}, LENDING_WEIGHTS),
    ("lending_strict", {"name": "lending", "n_rows": 240, "seed": 7, "variant": "strictest"}, LENDING_WEIGHTS),
    ("health", {"name": "healthcare", "n_rows": 240, "seed": 1, "variant": "balanced"}, HEALTH_WEIGHTS),
]


def run(args) -> None:
    code = cli_main([str(a) for a in args])
    if code != 0:
        sys.exit(f"cli exited {code} for: {' '.join(map(str, args))}")


def ranking_of(selection_path: Path, order_hint: list[str]) -> list[str]:
    selection = jsonio.read_json(selection_path)
    composites = selection["mean_composite"]
    return sorted(order_hint, key=lambda n: (-composites[n], order_hint.index(n)))


def main() -> None:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    rankings = {}
    with tempfile.TemporaryDirectory() as tmp:
        tmp_path = Path(tmp)
        for label, scenario, weight_sets in CASES:
            spec = dict(scenario)
            spec.update({"schema": "concord.scenario/1", "noise": 0.05, "params": {}})
            spec_path = tmp_path / f"{label}.scenario.json"
            jsonio.write_json(spec, spec_path)
            csv_path = tmp_path / f"{label}.csv"
            run(["generate", "--config", spec_path, "--out", csv_path])
            run_config = {
                "schema": "concord.run/1",
                "dataset": {
                    "csv": str(csv_path),
                    "sidecar": str(csv_path.with_suffix(".sidecar.json")),
                },
                "k_folds": 2,
                "seed": 0,
                "outcome_model": {"kind": "forest", "trees": 8, "max_depth": 5},
                "reward_grid": [{"kind": "forest", "trees": 8, "max_depth": 5}],
            }
            run_path = tmp_path / f"{label}.run.json"
            jsonio.write_json(run_config, run_path)
            out_dir = tmp_path / label
            run(["select", "--config", run_path, "--out", out_dir])
            shutil.copy(out_dir / "bundle.json", GOLDEN / f"bundle_{label}.json")

            bundle = jsonio.read_json(out_dir / "bundle.json")
            order_hint = [s["name"] for s in bundle["strategies"]]
            entries = []
            for i, weights in enumerate(weight_sets):
                weights_path = tmp_path / f"{label}.w{i}.json"
                jsonio.write_json({"schema": "concord.weights/1", "weights": weights}, weights_path)
                rerun_dir = tmp_path / f"{label}.w{i}"
                run(
                    [
                        "select",
                        "--config",
                        run_path,
                        "--out",
                        rerun_dir,
                        "--weights",
                        weights_path,
                    ]
                )
                entries.append(
                    {
                        "weights": weights,
                        "cli_ranking": ranking_of(rerun_dir / "selection.json", order_hint),
                    }
                )
            rankings[label] = entries

        pert = {
            "schema": "concord.perturbation/1",
            "delta": 0.02,
            "mu": 0.05,
            "coalition": ["bank"],
            "tau": {"mode": "optimal"},
            "samples": 100,
            "grid": {
                "deltas": [0.01, 0.02],
                "coalitions": [["bank"], ["bank", "applicant"]],
            },
        }
        pert_path = tmp_path / "pert.json"
        jsonio.write_json(pert, pert_path)
        run(
            [
                "certify",
                "--bundle",
                tmp_path / "lending0" / "bundle.json",
                "--config",
                pert_path,
                "--out",
                GOLDEN / "certs_lending0.json",
            ]
        )

    jsonio.write_json(rankings, GOLDEN / "cli_rankings.json")
    print(f"golden fixtures written to {GOLDEN}")


if __name__ == "__main__":
    main()
