"""Command-line orchestration: generate, select, recommend, certify.

Every command is deterministic given its config and seed: outputs carry
no timestamps and JSON is written with sorted keys, so reruns are
byte-identical.  Exit codes: 0 success, 2 validation error,
3 infeasibility, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import jsonio
from .core_model import (
    ActionSpace,
    AugmentedDataset,
    DatasetSchema,
    OutcomeSpace,
    StakeholderSet,
    ingest_csv,
    write_csv,
)
from .errors import (
    ConcordError,
    ConfigurationError,
    FeasibilityError,
    SchemaError,
    ValidationError,
)
from .evaluation import (
    BUNDLE_SCHEMA,
    Metric,
    MetricInputs,
    bundle_from_selection,
    check_bundle_schema,
    cross_validate_select,
)
from .learners import (
    DEFAULT_OUTCOME_CONFIG,
    DEFAULT_REWARD_GRID,
    LearnerConfig,
    OutcomePredictor,
    RewardModel,
    fit_outcome_model,
    fit_reward_model,
)
from .robustness import (
    DEFAULT_MU,
    MAX_BRUTE_FORCE_COORDS,
    PerturbationSpec,
    RuleScorer,
    brute_force_worst_case,
    calibrate_and_certify,
    check_ranking_consistency,
    coalition_mask,
)
from .scenarios import (
    ScenarioSpec,
    case_metrics,
    generate,
    parse_scenario_spec,
)
from .strategies import (
    Strategy,
    StrategySet,
    decide,
    default_compromise_strategies,
    parse_strategy,
    parse_strategy_shorthand,
    score_actions,
)

logger = logging.getLogger("concord")

RUN_SCHEMA = "concord.run/1"
SIDECAR_SCHEMA = "concord.sidecar/1"
STORE_SCHEMA = "concord.store/1"
CERT_SCHEMA = "concord.certificates/1"
PERTURBATION_SCHEMA = "concord.perturbation/1"
WEIGHTS_SCHEMA = "concord.weights/1"

# auto radius: this fraction of the tightest tube slack over the coalition
AUTO_DELTA_FRACTION = 0.5
# certification clips the tensor this far inside the tube (in units of the
# radius) so the requested radius is feasible for every entry
CLIP_MARGIN_FACTOR = 1.1

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4


def _setup_logging() -> None:
    level = os.environ.get("CONCORD_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


# ---------------------------------------------------------------------------
# shared config plumbing


def _spaces_json(spec_schema: DatasetSchema) -> dict:
    out = {
        "actions": list(spec_schema.actions.actions),
        "feature_names": list(spec_schema.feature_names),
        "group_column": spec_schema.group_column,
    }
    if spec_schema.outcomes.is_discrete:
        out["outcomes"] = {"kind": "discrete", "labels": list(spec_schema.outcomes.labels)}
    else:
        out["outcomes"] = {
            "kind": "continuous",
            "bin_edges": list(spec_schema.outcomes.bin_edges),
        }
    if spec_schema.actors is not None:
        out["actors"] = list(spec_schema.actors.actors)
    return out


def _schema_from_spaces(obj: dict) -> DatasetSchema:
    outcomes = obj["outcomes"]
    space = (
        OutcomeSpace.discrete(outcomes["labels"])
        if outcomes["kind"] == "discrete"
        else OutcomeSpace.continuous(outcomes["bin_edges"])
    )
    return DatasetSchema(
        feature_names=tuple(obj["feature_names"]),
        actions=ActionSpace(tuple(obj["actions"])),
        outcomes=space,
        actors=StakeholderSet(tuple(obj["actors"])) if obj.get("actors") else None,
        group_column=obj.get("group_column"),
    )


def _parse_weights_arg(text: str | None) -> dict | None:
    if not text:
        return None
    path = Path(text)
    if path.suffix == ".json" or path.exists():
        doc = jsonio.read_json(path)
        if isinstance(doc, dict) and "weights" in doc:
            return dict(doc["weights"])
        if isinstance(doc, dict):
            return doc
        raise SchemaError("/weights: expected an object of metric weights")
    weights = {}
    for part in text.split(","):
        if "=" not in part:
            raise SchemaError(f"/weights: expected name=value pairs, got {part!r}")
        name, value = part.split("=", 1)
        weights[name.strip()] = float(value)
    return weights


def _default_strategies(
    scenario: str, actors: StakeholderSet, outcomes: OutcomeSpace, oracle_map: dict | None
) -> StrategySet:
    desirable = 0 if scenario == "lending" else outcomes.m - 1
    pairs = (
        tuple(sorted((int(k), int(v)) for k, v in oracle_map.items()))
        if oracle_map
        else None
    )
    items = [
        Strategy(name="oracle", kind="oracle", outcome_action_map=pairs),
        Strategy(name="agent_agnostic", kind="agent_agnostic", desirable_outcome=desirable),
    ]
    items += [
        Strategy(name=f"single_agent:{a}", kind="single_agent", actor=a, actor_index=i)
        for i, a in enumerate(actors.actors)
    ]
    items += default_compromise_strategies()
    return StrategySet(strategies=tuple(items))


def _resolve_strategies(
    entries, actors, actions, outcomes, oracle_map
) -> StrategySet:
    resolved = []
    for entry in entries:
        if isinstance(entry, str):
            resolved.append(
                parse_strategy_shorthand(entry, actors, actions, outcomes, oracle_map)
            )
        else:
            resolved.append(parse_strategy(entry, actors, actions, outcomes))
    return StrategySet(strategies=tuple(resolved))


def _learner_config(obj, fallback: LearnerConfig) -> LearnerConfig:
    if obj is None:
        return fallback
    return LearnerConfig.from_json(obj)


def _reward_grid(obj) -> Sequence[LearnerConfig]:
    if obj is None:
        return DEFAULT_REWARD_GRID
    return [LearnerConfig.from_json(entry) for entry in obj]


# ---------------------------------------------------------------------------
# generate


def cmd_generate(args) -> int:
    doc = jsonio.read_json(args.config)
    spec = parse_scenario_spec(doc)
    if args.seed is not None:
        spec = ScenarioSpec(
            name=spec.name,
            n_rows=spec.n_rows,
            seed=args.seed,
            noise=spec.noise,
            variant=spec.variant,
            params=spec.params,
        )
    gen = generate(spec)
    out_csv = Path(args.out)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    write_csv(gen.augmented, out_csv)
    sidecar = {
        "schema": SIDECAR_SCHEMA,
        "scenario": spec.to_json(),
        "spaces": _spaces_json(gen.augmented.base.schema),
        "ground_truth": gen.ground_truth,
    }
    sidecar_path = out_csv.with_suffix(".sidecar.json")
    jsonio.write_json(sidecar, sidecar_path)
    print(f"wrote {gen.augmented.n} rows to {out_csv}")
    print(f"wrote generator ground truth to {sidecar_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# select


def _load_run_inputs(config: dict, override_seed: int | None):
    if config.get("schema") != RUN_SCHEMA:
        raise SchemaError(f"/schema: expected {RUN_SCHEMA!r}, got {config.get('schema')!r}")
    seed = override_seed if override_seed is not None else int(config.get("seed", 0))

    if "scenario" in config:
        scenario_doc = config["scenario"]
        if isinstance(scenario_doc, str):
            scenario_doc = jsonio.read_json(scenario_doc)
        spec = parse_scenario_spec(scenario_doc)
        gen = generate(spec)
        augmented = gen.augmented
        ground_truth = gen.ground_truth
        scenario_name = spec.name
        metrics = case_metrics(spec)
    elif "dataset" in config:
        entry = config["dataset"]
        sidecar = jsonio.read_json(entry["sidecar"])
        if sidecar.get("schema") != SIDECAR_SCHEMA:
            raise SchemaError(f"/dataset/sidecar: expected schema {SIDECAR_SCHEMA!r}")
        schema = _schema_from_spaces(sidecar["spaces"])
        data = ingest_csv(entry["csv"], schema)
        if not isinstance(data, AugmentedDataset):
            actors = schema.actors.actors if schema.actors else []
            raise ValidationError(
                f"dataset {entry['csv']} is missing reward columns for actors "
                f"{list(actors)}; select needs a reward-augmented CSV"
            )
        augmented = data
        ground_truth = sidecar["ground_truth"]
        scenario_name = sidecar["scenario"]["name"]
        metrics = case_metrics(parse_scenario_spec(sidecar["scenario"]))
    else:
        raise SchemaError("/: run config needs either 'scenario' or 'dataset'")

    oracle_map = ground_truth.get("oracle_map")
    if oracle_map is not None:
        oracle_map = {int(k): int(v) for k, v in oracle_map.items()}
    pat = ground_truth.get("per_action_truths")
    per_action_truths = None if pat is None else np.asarray(pat, dtype=float)
    return augmented, metrics, scenario_name, oracle_map, per_action_truths, seed


def _strategy_metric_table(result, metrics) -> str:
    names = result.strategy_names
    lines = []
    header = f"{'strategy':<34}" + "".join(f"{m.name[:14]:>16}" for m in metrics) + f"{'composite':>12}"
    lines.append(header)
    lines.append("-" * len(header))
    for name in names:
        raws = [
            float(np.mean([fr.raw[name][m.name] for fr in result.folds])) for m in metrics
        ]
        row = f"{name:<34}" + "".join(f"{v:>16.4f}" for v in raws)
        row += f"{result.mean_composite[name]:>12.4f}"
        if name == result.selected:
            row += "  <- selected"
        lines.append(row)
    return "\n".join(lines)


def cmd_select(args) -> int:
    config = jsonio.read_json(args.config)
    augmented, metrics, scenario_name, oracle_map, per_action_truths, seed = _load_run_inputs(
        config, args.seed
    )
    schema = augmented.base.schema
    actors = schema.actors
    assert actors is not None

    if args.strategies:
        entries = [s for s in args.strategies.split(",") if s]
        strategy_set = _resolve_strategies(
            entries, actors, schema.actions, schema.outcomes, oracle_map
        )
    elif config.get("strategies"):
        strategy_set = _resolve_strategies(
            config["strategies"], actors, schema.actions, schema.outcomes, oracle_map
        )
    else:
        strategy_set = _default_strategies(
            scenario_name, actors, schema.outcomes, oracle_map
        )

    weights = _parse_weights_arg(args.weights) or config.get("weights")
    k_folds = args.folds if args.folds is not None else int(config.get("k_folds", 5))
    outcome_config = _learner_config(config.get("outcome_model"), DEFAULT_OUTCOME_CONFIG)
    reward_grid = _reward_grid(config.get("reward_grid"))

    result = cross_validate_select(
        augmented.base,
        augmented,
        strategy_set,
        metrics,
        weights=weights,
        k_folds=k_folds,
        seed=seed,
        outcome_config=outcome_config,
        reward_grid=reward_grid,
        per_action_truths=per_action_truths,
    )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle = bundle_from_selection(
        result,
        strategy_set,
        metrics,
        actors=actors.actors,
        actions=schema.actions.actions,
        outcomes_json=_spaces_json(schema)["outcomes"],
        scenario=scenario_name,
    )
    jsonio.write_json(bundle, out_dir / "bundle.json")

    # deployment models are refit on all rows
    outcome_model, outcome_report = fit_outcome_model(
        augmented.base, outcome_config, seed=seed
    )
    models_dir = out_dir / "models"
    models_dir.mkdir(exist_ok=True)
    jsonio.write_json(outcome_model.to_json(), models_dir / "outcome.json")
    reward_reports = {}
    for actor in actors.actors:
        model, report = fit_reward_model(augmented, actor, reward_grid, seed=seed)
        jsonio.write_json(model.to_json(), models_dir / f"reward_{actor}.json")
        reward_reports[actor] = report.to_json(include_timings=False)
    # the oracle is a test-time benchmark; deployment needs a strategy that
    # works without the realized outcome
    deployable = [s.name for s in strategy_set if s.kind != "oracle"]
    if not deployable:
        raise ConfigurationError("strategy set contains only the oracle; nothing to deploy")
    selected_deployable = max(deployable, key=lambda n: (result.mean_composite[n], -deployable.index(n)))
    store = {
        "schema": STORE_SCHEMA,
        "scenario": scenario_name,
        "spaces": _spaces_json(schema),
        "strategies": [s.to_json() for s in strategy_set],
        "selected": result.selected,
        "selected_deployable": selected_deployable,
        "seed": seed,
        "oracle_map": {str(k): v for k, v in oracle_map.items()} if oracle_map else None,
        "reports": {
            "outcome": outcome_report.to_json(include_timings=False),
            "rewards": reward_reports,
        },
    }
    jsonio.write_json(store, out_dir / "store.json")
    selection = {
        "selected": result.selected,
        "selected_deployable": selected_deployable,
        "mean_composite": result.mean_composite,
        "per_fold_composite": [fr.composite for fr in result.folds],
        "weights": result.weights,
        "seed": seed,
        "k_folds": k_folds,
    }
    jsonio.write_json(selection, out_dir / "selection.json")

    print(_strategy_metric_table(result, metrics))
    print(f"\nselected strategy: {result.selected}")
    if selected_deployable != result.selected:
        print(f"deployable strategy: {selected_deployable}")
    print(f"bundle: {out_dir / 'bundle.json'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# recommend


def _load_store(models_dir: Path):
    store = jsonio.read_json(models_dir / "store.json")
    if store.get("schema") != STORE_SCHEMA:
        raise SchemaError(f"/schema: expected {STORE_SCHEMA!r} in store.json")
    schema = _schema_from_spaces(store["spaces"])
    outcome_model = OutcomePredictor.from_json(
        jsonio.read_json(models_dir / "models" / "outcome.json")
    )
    reward_models = {
        actor: RewardModel.from_json(
            jsonio.read_json(models_dir / "models" / f"reward_{actor}.json")
        )
        for actor in schema.actors.actors  # type: ignore[union-attr]
    }
    strategies = _resolve_strategies(
        store["strategies"],
        schema.actors,
        schema.actions,
        schema.outcomes,
        {int(k): v for k, v in store["oracle_map"].items()} if store.get("oracle_map") else None,
    )
    return store, schema, outcome_model, reward_models, strategies


def _context_matrix(doc, schema: DatasetSchema) -> np.ndarray:
    if isinstance(doc, dict) and "contexts" in doc:
        rows = doc["contexts"]
    elif isinstance(doc, dict):
        rows = [doc]
    elif isinstance(doc, list):
        rows = doc
    else:
        raise SchemaError("/: context document must be an object or a list")
    matrix = np.empty((len(rows), len(schema.feature_names)))
    for i, row in enumerate(rows):
        feats = row.get("features", row) if isinstance(row, dict) else row
        if isinstance(feats, dict):
            missing = [c for c in schema.feature_names if c not in feats]
            if missing:
                raise SchemaError(f"/contexts/{i}: missing features {missing}")
            matrix[i] = [float(feats[c]) for c in schema.feature_names]
        else:
            values = list(feats)
            if len(values) != len(schema.feature_names):
                raise SchemaError(
                    f"/contexts/{i}: expected {len(schema.feature_names)} features, "
                    f"got {len(values)}"
                )
            matrix[i] = [float(v) for v in values]
    return matrix


def recommend_records(
    store, schema, outcome_model, reward_models, strategies, X: np.ndarray
) -> list[dict]:
    actors = schema.actors
    outcome_probs = outcome_model.predict_proba_all_actions(X)
    reward_stack = np.stack(
        [reward_models[a].predict_matrix_batch(X) for a in actors.actors], axis=1
    )
    from .core_model import build_expected_reward_tensor

    tensor = build_expected_reward_tensor(outcome_probs, reward_stack).values
    deployed_name = store.get("selected_deployable", store["selected"])
    selected = next(s for s in strategies if s.name == deployed_name)
    records = []
    for t in range(X.shape[0]):
        per_strategy = {}
        for s in strategies:
            if s.kind == "oracle":
                continue  # needs the realized outcome; not available online
            dist = decide(s, tensor[t], outcome_probs=outcome_probs[t])
            per_strategy[s.name] = {
                "action_index": dist.argmax,
                "action": schema.actions.actions[dist.argmax],
                "probs": dist.probs.tolist(),
            }
        record = {
            "context_index": t,
            "expected_rewards": {
                actor: tensor[t, i].tolist() for i, actor in enumerate(actors.actors)
            },
            "strategies": per_strategy,
            "selected_strategy": selected.name,
        }
        if selected.kind != "oracle":
            record["action_index"] = per_strategy[selected.name]["action_index"]
            record["action"] = per_strategy[selected.name]["action"]
        if selected.is_compromise:
            record["rule_scores"] = score_actions(selected.rule, tensor[t]).tolist()
        records.append(record)
    return records


def cmd_recommend(args) -> int:
    models_dir = Path(args.models)
    store, schema, outcome_model, reward_models, strategies = _load_store(models_dir)
    doc = jsonio.read_json(args.context)
    X = _context_matrix(doc, schema)
    records = recommend_records(store, schema, outcome_model, reward_models, strategies, X)
    body = "\n".join(jsonio.dumps_compact(r) for r in records) + "\n"
    if args.out:
        Path(args.out).write_text(body)
    else:
        sys.stdout.write(body)
    for record in records:
        if "action" in record:
            logger.info("context %d -> %s", record["context_index"], record["action"])
    return EXIT_OK


# ---------------------------------------------------------------------------
# certify


def _parse_perturbation(doc: dict, actors: Sequence[str]) -> dict:
    if doc.get("schema") != PERTURBATION_SCHEMA:
        raise SchemaError(
            f"/schema: expected {PERTURBATION_SCHEMA!r}, got {doc.get('schema')!r}"
        )
    mu = float(doc.get("mu", DEFAULT_MU))
    if not (0.0 < mu < 0.5):
        raise SchemaError(f"/mu: expected a number in (0, 0.5), got {mu}")
    coalition_names = doc.get("coalition")
    if not coalition_names:
        raise SchemaError("/coalition: at least one actor name is required")
    indices = []
    for name in coalition_names:
        if name not in actors:
            raise SchemaError(f"/coalition: unknown actor {name!r}")
        indices.append(list(actors).index(name))
    tau_doc = doc.get("tau", {"mode": "optimal"})
    mode = tau_doc.get("mode", "optimal")
    if mode not in ("optimal", "fixed"):
        raise SchemaError(f"/tau/mode: expected optimal|fixed, got {mode!r}")
    tau = None
    if mode == "fixed":
        tau = float(tau_doc.get("value", 0.0))
        if tau <= 0:
            raise SchemaError("/tau/value: fixed temperature must be positive")
    return {
        "delta": doc.get("delta", "auto"),
        "mu": mu,
        "coalition": tuple(indices),
        "coalition_names": list(coalition_names),
        "tau": tau,
        "oracle": bool(doc.get("oracle", False)),
        "samples": int(doc.get("samples", 200)),
        "grid": doc.get("grid"),
    }


def _resolve_delta_and_clip(
    delta, tensor: np.ndarray, coalition, mu: float
) -> tuple[float, np.ndarray, float]:
    """Pick the radius and clip the tensor so the radius is feasible.

    An 'auto' radius takes a fraction of the tightest tube slack over the
    coalition.  When entries sit at (or within the radius of) the tube
    boundary, the tensor is clipped to mu + 1.1 * delta on each side, which
    restores strict feasibility; the clip bound is returned so certificates
    can record the tensor they actually certified.
    """
    clipped = np.clip(tensor, mu, 1.0 - mu)
    coal = clipped[:, list(coalition), :]
    slack = float(np.minimum(coal - mu, 1.0 - mu - coal).min())
    if delta == "auto":
        if slack > 1e-9:
            return AUTO_DELTA_FRACTION * slack, clipped, mu
        delta = AUTO_DELTA_FRACTION * (0.5 - mu) / 2.0
    delta = float(delta)
    if delta < slack:
        return delta, clipped, mu
    bound = mu + CLIP_MARGIN_FACTOR * delta
    if bound >= 0.5:
        raise FeasibilityError(
            f"radius {delta} cannot fit inside the tube: the inner clip bound "
            f"{bound:.3f} reaches the tube midpoint (mu={mu})"
        )
    return delta, np.clip(tensor, bound, 1.0 - bound), bound


def certification_inputs(bundle: dict):
    """Pull the tensors, truths, and metric objects back out of a bundle.

    Certificates need metrics with fixed value bounds (the certified score
    must be a self-contained function of the tensor), so unbounded metrics
    are dropped and the remaining weights renormalized; the certificate
    names the metrics it actually covers.
    """
    check_bundle_schema(bundle)
    scenario = bundle.get("scenario")
    if scenario is None:
        raise ConfigurationError(
            "bundle has no scenario tag; certification needs the scenario's metric set"
        )
    metric_names = [m["name"] for m in bundle["metrics"]]
    spec_doc = {"schema": "concord.scenario/1", "name": scenario, "n_rows": 1}
    all_metrics = [
        m for m in case_metrics(parse_scenario_spec(spec_doc)) if m.name in metric_names
    ]
    metrics = [
        m for m in all_metrics if m.bounds is not None and bundle["weights"][m.name] > 0
    ]
    if not metrics:
        raise ConfigurationError(
            "no bounded, positively weighted metrics in this bundle; nothing to certify"
        )
    raw_weights = np.asarray([bundle["weights"][m.name] for m in metrics])
    weights = raw_weights / raw_weights.sum()
    tensor = np.concatenate([np.asarray(f["tensor"], dtype=float) for f in bundle["folds"]])
    truths = np.concatenate([np.asarray(f["truths"]) for f in bundle["folds"]])
    groups = (
        np.concatenate([np.asarray(f["groups"]) for f in bundle["folds"]])
        if bundle["folds"][0].get("groups") is not None
        else None
    )
    pat = (
        np.concatenate([np.asarray(f["per_action_truths"], dtype=float) for f in bundle["folds"]])
        if bundle["folds"][0].get("per_action_truths") is not None
        else None
    )
    inputs = MetricInputs(truths=truths, groups=groups, per_action_values=pat)
    rules = [s for s in bundle["strategies"] if s.get("kind") == "compromise"]
    return metrics, weights, inputs, tensor, rules


def cmd_certify(args) -> int:
    bundle = jsonio.read_json(args.bundle)
    doc = jsonio.read_json(args.config) if args.config else {"schema": PERTURBATION_SCHEMA}
    if args.coalition:
        doc["coalition"] = [c for c in args.coalition.split(",") if c]
    if args.delta is not None:
        doc["delta"] = "auto" if args.delta == "auto" else float(args.delta)
    if args.mu is not None:
        doc["mu"] = float(args.mu)
    if args.tau is not None:
        if args.tau == "optimal":
            doc["tau"] = {"mode": "optimal"}
        elif args.tau.startswith("fixed:"):
            doc["tau"] = {"mode": "fixed", "value": float(args.tau.split(":", 1)[1])}
        else:
            raise SchemaError("/tau: expected 'optimal' or 'fixed:<value>'")
    if args.oracle is not None:
        doc["oracle"] = args.oracle == "on"
    doc.setdefault("coalition", bundle["actors"][:1])

    pert = _parse_perturbation(doc, bundle["actors"])
    metrics, weights, inputs, raw_tensor, rule_docs = certification_inputs(bundle)
    mu = pert["mu"]

    seed = args.seed if args.seed is not None else int(bundle.get("seed", 0))
    report = _certify_once(
        raw_tensor, metrics, weights, inputs, rule_docs, pert, mu, seed
    )

    grid_entries = []
    grid_doc = pert.get("grid") or {}
    deltas = grid_doc.get("deltas", [])
    coalitions = grid_doc.get("coalitions") or [pert["coalition_names"]]
    for names in coalitions:
        indices = tuple(list(bundle["actors"]).index(n) for n in names)
        for delta in deltas:
            sub = dict(pert)
            sub["delta"] = delta
            sub["coalition"] = indices
            sub["coalition_names"] = list(names)
            entry = _certify_once(
                raw_tensor, metrics, weights, inputs, rule_docs, sub, mu, seed
            )
            entry["coalition"] = list(names)
            grid_entries.append(entry)

    out_doc = {
        "schema": CERT_SCHEMA,
        "bundle_seed": bundle.get("seed"),
        "scenario": bundle.get("scenario"),
        "mu": mu,
        "coalition": pert["coalition_names"],
        "certified_metrics": {m.name: float(w) for m, w in zip(metrics, weights)},
        "report": report,
        "grid": grid_entries,
    }
    out_path = Path(args.out) if args.out else Path("certificates.json")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    jsonio.write_json(out_doc, out_path)

    print(f"delta={report['delta']:.6g} mu={mu} coalition={pert['coalition_names']}")
    for phi, cert in report["rules"].items():
        line = (
            f"{phi:<28} S_tau={cert['smooth_score']:+.4f} RLB={cert['rlb']:+.4f} "
            f"(grad {cert['gradient_term']:.4f}, curv {cert['curvature_term']:.4f}, "
            f"bias {cert['bias_term']:.4f}, tau {cert['tau']:.4g})"
        )
        if "oracle_worst_case" in cert:
            line += f" oracle={cert['oracle_worst_case']:+.4f}"
        print(line)
    ranking = report["ranking"]
    print(
        f"ranking: {ranking['verdict']} "
        f"(min gap {ranking['min_gap']:.4g} vs max pair error {ranking['max_pair_error']:.4g})"
    )
    print(f"certificates: {out_path}")
    return EXIT_OK


def _certify_once(raw_tensor, metrics, weights, inputs, rule_docs, pert, mu, seed) -> dict:
    from .strategies import CompromiseRule

    delta, tensor, clip_bound = _resolve_delta_and_clip(
        pert["delta"], raw_tensor, pert["coalition"], mu
    )
    spec = PerturbationSpec(coalition=pert["coalition"], delta=delta, mu=mu)
    scorers = {}
    for doc in rule_docs:
        params = doc.get("params", {})
        rule = CompromiseRule(
            phi=doc["phi"],
            selector="softmax",
            tau=params.get("tau", 1.0),
            d=tuple(params["d"]) if "d" in params else None,
            u_star=tuple(params["u_star"]) if "u_star" in params else None,
            weights=tuple(params["weights"]) if "weights" in params else None,
            eps_floor=params.get("eps_floor", 1e-9),
        )
        scorers[doc["phi"]] = RuleScorer(rule, metrics, weights, inputs, mu=mu)

    rules_out = {}
    constants = {}
    for phi, scorer in scorers.items():
        cert = calibrate_and_certify(
            tensor, scorer, spec, tau=pert["tau"], samples=pert["samples"], seed=seed
        )
        constants[phi] = cert.constants
        doc = cert.to_json()
        n_coords = int(coalition_mask(tensor.shape, spec.coalition).sum())
        if pert["oracle"] and n_coords <= MAX_BRUTE_FORCE_COORDS and delta > 0:
            doc["oracle_worst_case"] = brute_force_worst_case(tensor, scorer, spec, seed=seed)
        rules_out[phi] = doc

    ranking = check_ranking_consistency(
        tensor, scorers, spec, constants, probe_samples=min(pert["samples"], 1000), seed=seed
    )
    return {
        "delta": delta,
        "clip_bound": clip_bound,
        "rules": rules_out,
        "ranking": ranking.to_json(),
    }


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="concord",
        description="Multi-stakeholder decision engine: synthetic scenarios, "
        "strategy selection, recommendation, robustness certification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize a scenario dataset CSV + sidecar")
    g.add_argument("--config", required=True, help="scenario spec JSON")
    g.add_argument("--out", required=True, help="output CSV path")
    g.add_argument("--seed", type=int, default=None, help="override the spec seed")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("select", help="cross-validated strategy selection")
    s.add_argument("--config", required=True, help="run config JSON")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--strategies", default=None, help="comma list of strategy shorthands")
    s.add_argument("--weights", default=None, help="metric weights: name=w,... or a JSON path")
    s.add_argument("--folds", type=int, default=None)
    s.set_defaults(func=cmd_select)

    r = sub.add_parser("recommend", help="recommend actions for new contexts")
    r.add_argument("--models", required=True, help="directory produced by select")
    r.add_argument("--context", required=True, help="context JSON (single or batch)")
    r.add_argument("--out", default=None, help="output JSONL path (default stdout)")
    r.set_defaults(func=cmd_recommend)

    c = sub.add_parser("certify", help="robustness certificates for a bundle")
    c.add_argument("--bundle", required=True, help="evaluation bundle JSON")
    c.add_argument("--config", default=None, help="perturbation spec JSON")
    c.add_argument("--out", default=None, help="certificate JSON output path")
    c.add_argument("--tau", default=None, help="'optimal' or 'fixed:<value>'")
    c.add_argument("--delta", default=None, help="radius, or 'auto'")
    c.add_argument("--mu", type=float, default=None)
    c.add_argument("--coalition", default=None, help="comma list of actor names")
    c.add_argument("--oracle", choices=("on", "off"), default=None)
    c.add_argument("--seed", type=int, default=None)
    c.set_defaults(func=cmd_certify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FeasibilityError as err:
        print(f"infeasible: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, FileNotFoundError) as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO
    except ConcordError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
