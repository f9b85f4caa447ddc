"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with -s to see them).  Tolerances are fixed here, not
tuned at runtime.
"""

import json
import time

import numpy as np
import pytest
from conftest import random_instance, scorer_for

from concord import jsonio
from concord.cli import main as cli_main
from concord.evaluation import (
    MetricInputs,
    accuracy_metric,
    action_entropy,
    evaluate_holdout,
)
from concord.learners import LearnerConfig, OutcomePredictor, RewardModel, fit_outcome_model, fit_reward_model
from concord.core_model import (
    ActionSpace,
    AugmentedDataset,
    Dataset,
    DatasetSchema,
    OutcomeSpace,
    StakeholderSet,
    build_expected_reward_tensor,
)
from concord.robustness import (
    PerturbationSpec,
    RuleScorer,
    _sample_ball,
    brute_force_worst_case,
    calibrate_and_certify,
    check_ranking_consistency,
    coalition_mask,
    estimate_constants,
    optimal_temperature,
    penalty,
)
from concord.scenarios import ScenarioSpec, case_metrics, generate_lending
from concord.strategies import (
    ALL_PHIS,
    CompromiseRule,
    Strategy,
    StrategySet,
    default_compromise_strategies,
    score_actions,
)

MU = 0.05


def report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] {name}" + (f" - {detail}" if detail else ""))


# ---------------------------------------------------------------------------
# certificate soundness


class TestCertificateSoundness:
    def test_brute_force_never_beats_rlb(self):
        """>= 200 random instances, all 7 rules: oracle worst case >= RLB."""
        rng = np.random.default_rng(20240)
        shapes = [(1, 2, 2), (1, 3, 4), (2, 2, 3), (2, 3, 4), (3, 3, 3), (4, 2, 2), (5, 3, 1)]
        deltas = (0.02, 0.05, 0.1)
        n_instances = 200
        violations = 0
        checked = 0
        t0 = time.perf_counter()
        for i in range(n_instances):
            n_ctx, n_actors, n_actions = shapes[i % len(shapes)]
            if n_actions == 1:
                n_actions = 2  # degenerate single-action instances are out of scope
            tensor, metrics, weights, inputs = random_instance(
                rng, n_contexts=n_ctx, n_actors=n_actors, n_actions=n_actions
            )
            v = 1 if n_ctx * n_actions > 4 else min(2, n_actors)
            coalition = tuple(sorted(rng.choice(n_actors, size=v, replace=False).tolist()))
            if n_ctx * v * n_actions > 9:
                coalition = coalition[:1]
            delta = float(deltas[i % len(deltas)])
            spec = PerturbationSpec(coalition=coalition, delta=delta, mu=MU)
            for phi in ALL_PHIS:
                scorer = scorer_for(phi, metrics, weights, inputs)
                cert = calibrate_and_certify(tensor, scorer, spec, samples=120, seed=i)
                worst = brute_force_worst_case(tensor, scorer, spec, seed=i)
                checked += 1
                if worst < cert.rlb - 1e-12:
                    violations += 1
        elapsed = time.perf_counter() - t0
        ok = violations == 0 and elapsed < 300.0
        report(
            "certificate soundness",
            ok,
            f"{checked} certificates over {n_instances} instances, "
            f"{violations} violations, {elapsed:.1f}s",
        )
        assert violations == 0
        assert elapsed < 300.0


class TestOptimalTemperatureLemma:
    def test_cube_root_formula_minimizes_penalty_grid(self):
        """>= 50 random tuples: tau* is the argmin of g on a 100-point log grid."""
        rng = np.random.default_rng(7)
        failures = 0
        for _ in range(50):
            delta = float(rng.uniform(0.005, 0.2))
            beta = float(rng.uniform(0.01, 10.0))
            kappa = float(rng.uniform(0.01, 5.0))
            mu = float(rng.uniform(0.02, 0.45))
            tau_star = optimal_temperature(delta, beta, kappa, mu)
            g_star = penalty(tau_star, delta, beta, kappa, mu)
            grid = np.logspace(np.log10(tau_star / 100.0), np.log10(tau_star * 100.0), 100)
            if not all(g_star <= penalty(t, delta, beta, kappa, mu) + 1e-12 for t in grid):
                failures += 1
        report("optimal temperature", failures == 0, f"50 tuples, {failures} grid-argmin failures")
        assert failures == 0


class TestUniformBiasControl:
    def test_bias_bounded_by_kappa_tau_star_on_fresh_samples(self):
        """At tau*, the smooth-sharp gap stays below kappa_hat * tau* over the ball."""
        rng = np.random.default_rng(99)
        violations = 0
        checked = 0
        for trial in range(15):
            tensor, metrics, weights, inputs = random_instance(
                rng, n_contexts=3, n_actors=3, n_actions=3
            )
            delta = float(rng.choice([0.02, 0.05, 0.1]))
            coalition = (int(rng.integers(0, 3)),)
            for phi in ALL_PHIS:
                scorer = scorer_for(phi, metrics, weights, inputs)
                first = estimate_constants(
                    tensor, scorer, coalition, delta, MU, samples=150, seed=trial
                )
                tau_star = optimal_temperature(
                    delta, max(first.beta_hat, 1e-12), max(first.kappa_hat, 1e-12), MU
                )
                second = estimate_constants(
                    tensor, scorer, coalition, delta, MU,
                    tau_grid=(tau_star,), samples=400, seed=trial + 1,
                )
                kappa_hat = max(first.kappa_hat, second.kappa_hat)
                mask = coalition_mask(tensor.shape, coalition).astype(float)
                from concord.seeding import substream

                probe_rng = substream(trial + 2, f"bias-probe:{phi}")
                points = _sample_ball(tensor, mask, delta, MU, 1000, probe_rng)
                gap = np.abs(scorer.smooth(points, tau_star) - scorer.sharp(points))
                checked += 1
                if gap.max() > kappa_hat * tau_star + 1e-12:
                    violations += 1
        report(
            "uniform bias control",
            violations == 0,
            f"{checked} rule-instances, 1000 ball samples each, {violations} violations",
        )
        assert violations == 0


class TestRankingConsistency:
    @staticmethod
    def _planted_instance(rng, n_contexts=4):
        """Instance where utilitarian and maximin decisively disagree.

        Per context, one action wins on total welfare while another wins on
        the worst-off actor, with margins far wider than the perturbation
        radius so no argmax crossing exists inside the ball.  Truths follow
        the welfare winner, giving the two rules well separated sharp
        composite scores.
        """
        from concord.evaluation import value_metric

        tensor = np.empty((n_contexts, 3, 2))
        for t in range(n_contexts):
            jitter = rng.uniform(-0.02, 0.02, size=3)
            # action 0: big total, poor minimum; action 1: flat and safe
            tensor[t, :, 0] = np.clip(np.array([0.78, 0.74, 0.30]) + jitter, 0.2, 0.8)
            tensor[t, :, 1] = np.clip(np.array([0.52, 0.50, 0.48]) + jitter, 0.2, 0.8)
        truths = np.zeros(n_contexts, dtype=int)  # welfare winner is optimal
        welfare = tensor.mean(axis=1)
        inputs = MetricInputs(truths=truths, per_action_values=welfare)
        metrics = [
            accuracy_metric({0: 0, 1: 1}),
            value_metric("Expected_Welfare", bounds=(0.0, 1.0)),
        ]
        return tensor, metrics, np.array([0.6, 0.4]), inputs

    def _certified_instances(self, needed=50, max_tries=80):
        rng = np.random.default_rng(31)
        found = []
        tries = 0
        while len(found) < needed and tries < max_tries:
            tries += 1
            tensor, metrics, weights, inputs = self._planted_instance(rng)
            delta = 0.01
            coalition = (int(rng.integers(0, 3)),)
            spec = PerturbationSpec(coalition=coalition, delta=delta, mu=MU)
            scorers = {
                phi: RuleScorer(CompromiseRule(phi=phi), metrics, weights, inputs, mu=MU)
                for phi in ("utilitarian_sum", "maximin")
            }
            constants = {}
            for phi, scorer in scorers.items():
                constants[phi] = estimate_constants(
                    tensor, scorer, coalition, delta, MU, samples=120, seed=tries
                )
            result = check_ranking_consistency(
                tensor, scorers, spec, constants, probe_samples=1000, seed=tries
            )
            if result.verdict == "certified":
                found.append(result)
        return found, tries

    def test_certified_instances_have_no_probe_inversions(self):
        found, tries = self._certified_instances()
        inversions = sum(r.probe_violations for r in found)
        ok = len(found) >= 50 and inversions == 0
        report(
            "ranking consistency (certified)",
            ok,
            f"{len(found)} certified instances from {tries} candidates, "
            f"{inversions} probe inversions",
        )
        assert len(found) >= 50
        assert inversions == 0

    def test_near_ties_are_not_certified(self):
        rng = np.random.default_rng(53)
        bad = 0
        for trial in range(10):
            tensor, metrics, weights, inputs = random_instance(rng)
            spec = PerturbationSpec(coalition=(0,), delta=0.02, mu=MU)
            if trial % 2 == 0:
                # exact tie: the same rule twice
                scorers = {
                    "a": scorer_for("utilitarian_sum", metrics, weights, inputs),
                    "b": scorer_for("utilitarian_sum", metrics, weights, inputs),
                }
            else:
                # ranking gap microscopically small relative to the errors
                w1 = CompromiseRule(phi="utilitarian_sum", weights=(1.0, 1.0, 1.0))
                w2 = CompromiseRule(phi="utilitarian_sum", weights=(1.0, 1.0, 1.0 + 1e-9))
                scorers = {
                    "a": RuleScorer(w1, metrics, weights, inputs, mu=MU),
                    "b": RuleScorer(w2, metrics, weights, inputs, mu=MU),
                }
            constants = {
                name: estimate_constants(
                    tensor, s, spec.coalition, spec.delta, MU, samples=100, seed=trial
                )
                for name, s in scorers.items()
            }
            result = check_ranking_consistency(
                tensor, scorers, spec, constants, probe_samples=100, seed=trial
            )
            if result.verdict != "not_certified":
                bad += 1
        report("ranking consistency (near ties)", bad == 0, f"10 constructed ties, {bad} mis-certified")
        assert bad == 0


# ---------------------------------------------------------------------------
# operator correctness


class TestOperatorCorrectness:
    def test_nsw_pf_agreement(self):
        rng = np.random.default_rng(11)
        nsw = CompromiseRule(phi="nash_social_welfare")
        pf = CompromiseRule(phi="proportional_fairness")
        disagreements = 0
        for _ in range(10_000):
            E = rng.uniform(0.01, 1.0, size=(3, 4))
            if int(np.argmax(score_actions(nsw, E))) != int(np.argmax(score_actions(pf, E))):
                disagreements += 1
        report("NSW/PF argmax agreement", disagreements == 0, f"10000 matrices, {disagreements} disagreements")
        assert disagreements == 0

    def test_maximin_brute_force_agreement(self):
        rng = np.random.default_rng(13)
        rule = CompromiseRule(phi="maximin")
        mismatches = 0
        for _ in range(10_000):
            E = rng.uniform(0.0, 1.0, size=(3, 5))
            fast = int(np.argmax(score_actions(rule, E)))
            slow = max(range(5), key=lambda a: (E[:, a].min(), -a))
            if fast != slow:
                mismatches += 1
        report("maximin brute-force agreement", mismatches == 0, f"10000 matrices, {mismatches} mismatches")
        assert mismatches == 0

    def test_pareto_domination_sanity(self):
        rng = np.random.default_rng(17)
        failures = 0
        trials = 2000
        for _ in range(trials):
            n_actors = int(rng.integers(2, 4))
            dominated = rng.uniform(0.2, 0.6, size=n_actors)
            dominant = dominated + rng.uniform(0.02, 0.2, size=n_actors)
            E = np.stack([dominated, dominant], axis=1)
            d = tuple(E.min(axis=1) - 0.05)
            u = tuple(E.max(axis=1) + 0.05)
            rules = [
                CompromiseRule(phi="utilitarian_sum"),
                CompromiseRule(phi="maximin"),
                CompromiseRule(phi="nash_bargaining", d=d),
                CompromiseRule(phi="nash_social_welfare"),
                CompromiseRule(phi="proportional_fairness"),
                CompromiseRule(phi="kalai_smorodinsky", d=d, u_star=u),
                CompromiseRule(phi="compromise_programming_l2", u_star=u),
            ]
            for rule in rules:
                if int(np.argmax(score_actions(rule, E))) != 1:
                    failures += 1
        report("Pareto-domination sanity", failures == 0, f"{trials} dominated pairs x 7 rules, {failures} failures")
        assert failures == 0

    def test_documented_tie_breaks(self):
        from concord.strategies import select_sharp

        checks = [
            (np.array([1.0, 1.0]), 0),
            (np.array([-0.3, -0.3, -0.1]), 2),
            (np.array([0.5, 0.5, 0.5, 0.5]), 0),
        ]
        ok = all(select_sharp(s).argmax == want for s, want in checks)
        # the hand-tied compromise-programming example resolves to action 0
        E2 = np.array([[0.8, 0.5], [0.2, 0.5]])
        cp = CompromiseRule(phi="compromise_programming_l2", u_star=(0.8, 0.5))
        ok = ok and int(np.argmax(score_actions(cp, E2))) == 0
        report("documented tie-breaks", ok)
        assert ok


# ---------------------------------------------------------------------------
# pipeline correctness (handmade trace)


class TestPipelineTrace:
    def test_handmade_trace(self):
        from test_evaluation import TRACE_SEED, trace_dataset
        from concord.evaluation import cross_validate_select

        aug = trace_dataset()
        strategies = StrategySet(
            strategies=(
                Strategy(name="single_agent:alice", kind="single_agent", actor="alice", actor_index=0),
                Strategy(name="single_agent:bob", kind="single_agent", actor="bob", actor_index=1),
            )
        )
        result = cross_validate_select(
            aug.base,
            aug,
            strategies,
            [accuracy_metric({0: 0, 1: 1})],
            k_folds=2,
            seed=TRACE_SEED,
            outcome_config=LearnerConfig(kind="table"),
            reward_grid=[LearnerConfig(kind="table")],
        )
        checks = []
        for fr in result.folds:
            checks.append(abs(fr.raw["single_agent:alice"]["Accuracy"] - 1.0) <= 1e-12)
            checks.append(abs(fr.raw["single_agent:bob"]["Accuracy"] - 0.5) <= 1e-12)
            checks.append(abs(fr.normalized["single_agent:alice"]["Accuracy"] - 1.0) <= 1e-12)
            checks.append(abs(fr.normalized["single_agent:bob"]["Accuracy"] - 0.0) <= 1e-12)
            checks.append(abs(fr.composite["single_agent:alice"] - 1.0) <= 1e-12)
            checks.append(abs(fr.composite["single_agent:bob"] - 0.0) <= 1e-12)
        checks.append(result.selected == "single_agent:alice")
        ok = all(checks)
        report("pipeline trace", ok, "8-row table-predictor run matches hand arithmetic at 1e-12")
        assert ok


# ---------------------------------------------------------------------------
# directional replication on synthetic lending


def lending_strategy_set() -> StrategySet:
    items = [
        Strategy(name="oracle", kind="oracle", outcome_action_map=((0, 0), (1, 1), (2, 2))),
        Strategy(name="agent_agnostic", kind="agent_agnostic", desirable_outcome=0),
    ]
    items += [
        Strategy(name=f"single_agent:{a}", kind="single_agent", actor=a, actor_index=i)
        for i, a in enumerate(("bank", "applicant", "regulator"))
    ]
    items += default_compromise_strategies()
    return StrategySet(strategies=tuple(items))


class TestDirectionalReplication:
    def test_lending_directional_findings(self):
        sset = lending_strategy_set()
        metrics = case_metrics("lending")
        singles = [s.name for s in sset if s.kind == "single_agent"]
        compromises = [s.name for s in sset if s.kind == "compromise"]
        non_oracle = [s.name for s in sset if s.kind != "oracle"]
        config = LearnerConfig(kind="forest", trees=25, max_depth=8)

        a_hits = b_hits = c_hits = 0
        details = []
        for seed in (0, 1, 2, 3):
            gen = generate_lending(ScenarioSpec(name="lending", n_rows=5000, seed=seed, noise=0.05))
            fr = evaluate_holdout(
                gen.augmented.base,
                gen.augmented,
                sset,
                metrics,
                seed=seed,
                outcome_config=config,
                reward_grid=[config],
            )
            profit = {n: fr.raw[n]["Total_Profit"] for n in non_oracle}
            a = all(
                profit["single_agent:bank"] > v
                for n, v in profit.items()
                if n != "single_agent:bank"
            )
            dp = {n: fr.raw[n]["Demographic_Parity"] for n in sset.names}
            b = min(dp[n] for n in compromises) < min(dp[n] for n in singles)
            entropy = {n: action_entropy(fr.decisions[n]) for n in sset.names}
            c = float(np.mean([entropy[n] for n in compromises])) > max(
                entropy[n] for n in singles
            )
            a_hits += a
            b_hits += b
            c_hits += c
            details.append(f"seed{seed}:{'+' if a else '-'}{'+' if b else '-'}{'+' if c else '-'}")
        ok = a_hits >= 3 and b_hits >= 3 and c_hits >= 3
        report(
            "directional replication",
            ok,
            f"profit {a_hits}/4, parity {b_hits}/4, entropy {c_hits}/4 ({' '.join(details)})",
        )
        assert a_hits >= 3, "bank should top Total_Profit among non-oracle strategies"
        assert b_hits >= 3, "a compromise rule should beat every single-agent parity gap"
        assert c_hits >= 3, "compromise rules should recommend more diverse actions"


# ---------------------------------------------------------------------------
# online overhead scaling


class TestOnlineScaling:
    @staticmethod
    def _per_context_seconds(n_actors: int, n_actions: int, seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        n_train, n_ctx, d = 1500, 256, 24
        actors = StakeholderSet(tuple(f"actor{i}" for i in range(n_actors)))
        schema = DatasetSchema(
            feature_names=tuple(f"f{i}" for i in range(d)),
            actions=ActionSpace(tuple(f"a{i}" for i in range(n_actions))),
            outcomes=OutcomeSpace.discrete(("o0", "o1", "o2")),
            actors=actors,
        )
        base = Dataset(
            schema=schema,
            features=rng.random((n_train, d)),
            actions=rng.integers(0, n_actions, n_train),
            outcomes=rng.integers(0, 3, n_train),
        )
        augmented = AugmentedDataset(base=base, rewards=rng.random((n_train, n_actors)))
        config = LearnerConfig(kind="knn", k=15)
        outcome_model = OutcomePredictor(
            config=config, outcomes=schema.outcomes, n_actions=n_actions
        ).fit(base)
        reward_models = [
            RewardModel(
                actor=a, config=config, outcomes=schema.outcomes, n_actions=n_actions
            ).fit(augmented)
            for a in actors.actors
        ]
        X = rng.random((n_ctx, d))
        times = []
        for _ in range(3):
            t0 = time.perf_counter()
            probs = outcome_model.predict_proba_all_actions(X)
            stack = np.stack([m.predict_matrix_batch(X) for m in reward_models], axis=1)
            tensor = build_expected_reward_tensor(probs, stack).values
            rule = CompromiseRule(phi="utilitarian_sum")
            score_actions(rule, tensor)
            times.append(time.perf_counter() - t0)
        return min(times) / n_ctx

    def test_recommendation_time_linear_in_actions_times_actors(self):
        sizes = [(3, 3), (6, 3), (3, 6), (6, 6)]
        base = self._per_context_seconds(3, 3)
        ok = True
        details = []
        for n_actions, n_actors in sizes[1:]:
            measured = self._per_context_seconds(n_actors, n_actions) / base
            expected = (n_actions * n_actors) / 9.0
            rel = measured / expected
            details.append(f"({n_actions},{n_actors}): x{measured:.2f} vs x{expected:.2f}")
            if not (0.7 <= rel <= 1.3):
                ok = False
        report("online scaling", ok, "; ".join(details))
        assert ok, details


# ---------------------------------------------------------------------------
# CLI determinism


class TestCliDeterminism:
    def test_every_command_byte_reproducible(self, tmp_path):
        spec = tmp_path / "scenario.json"
        jsonio.write_json(
            {
                "schema": "concord.scenario/1",
                "name": "lending",
                "n_rows": 150,
                "seed": 3,
                "noise": 0.05,
                "variant": "balanced",
                "params": {},
            },
            spec,
        )
        run = tmp_path / "run.json"
        ctx = tmp_path / "ctx.json"
        jsonio.write_json(
            {
                "contexts": [
                    {"credit_score": 0.7, "income": 0.5, "debt_ratio": 0.3, "group": 0},
                    {"credit_score": 0.3, "income": 0.4, "debt_ratio": 0.6, "group": 1},
                ]
            },
            ctx,
        )
        pert = tmp_path / "pert.json"
        jsonio.write_json(
            {
                "schema": "concord.perturbation/1",
                "delta": 0.02,
                "mu": 0.05,
                "coalition": ["bank"],
                "tau": {"mode": "optimal"},
                "samples": 100,
            },
            pert,
        )

        hashes = []
        for run_id in ("one", "two"):
            root = tmp_path / run_id
            root.mkdir()
            csv = root / "data.csv"
            assert cli_main(["generate", "--config", str(spec), "--out", str(csv)]) == 0
            jsonio.write_json(
                {
                    "schema": "concord.run/1",
                    "dataset": {"csv": str(csv), "sidecar": str(root / "data.sidecar.json")},
                    "k_folds": 2,
                    "seed": 1,
                    "outcome_model": {"kind": "forest", "trees": 5, "max_depth": 4},
                    "reward_grid": [{"kind": "forest", "trees": 5, "max_depth": 4}],
                },
                run,
            )
            out = root / "out"
            assert cli_main(["select", "--config", str(run), "--out", str(out)]) == 0
            recs = root / "recs.jsonl"
            assert (
                cli_main(
                    ["recommend", "--models", str(out), "--context", str(ctx), "--out", str(recs)]
                )
                == 0
            )
            certs = root / "certs.json"
            assert (
                cli_main(
                    [
                        "certify",
                        "--bundle",
                        str(out / "bundle.json"),
                        "--config",
                        str(pert),
                        "--out",
                        str(certs),
                    ]
                )
                == 0
            )
            hashes.append(
                {
                    "generate": jsonio.sha256_file(csv),
                    "sidecar": jsonio.sha256_file(root / "data.sidecar.json"),
                    "bundle": jsonio.sha256_file(out / "bundle.json"),
                    "selection": jsonio.sha256_file(out / "selection.json"),
                    "store": jsonio.sha256_file(out / "store.json"),
                    "outcome_model": jsonio.sha256_file(out / "models" / "outcome.json"),
                    "recommend": jsonio.sha256_file(recs),
                    "certify": jsonio.sha256_file(certs),
                }
            )
        ok = hashes[0] == hashes[1]
        mismatched = [k for k in hashes[0] if hashes[0][k] != hashes[1][k]]
        report("CLI determinism", ok, "all outputs hash-identical" if ok else f"mismatch: {mismatched}")
        assert ok, mismatched
