import { describe, expect, it } from "vitest";

import { meanNormalized } from "../src/bundle.js";
import {
  compositeOf,
  crossoverWeights,
  metricOrder,
  normalizeWeights,
  recompose,
  storedCompositeDeviation,
} from "../src/recompose.js";
import { GOLDEN_LABELS, loadCliRankings, loadGoldenBundle } from "./helpers.js";

describe("recomposition consistency contract", () => {
  for (const label of GOLDEN_LABELS) {
    it(`matches stored composites at bundle weights to 1e-9 (${label})`, () => {
      const bundle = loadGoldenBundle(label);
      expect(storedCompositeDeviation(bundle)).toBeLessThanOrEqual(1e-9);
    });

    it(`reproduces the selection ranking with untouched weights (${label})`, () => {
      const bundle = loadGoldenBundle(label);
      const ranking = recompose(bundle, bundle.weights);
      expect(ranking[0].name).toBe(bundle.selected);
      const expected = bundle.strategies
        .map((s) => s.name)
        .sort(
          (a, b) =>
            bundle.mean_composite[b] - bundle.mean_composite[a] ||
            bundle.strategies.findIndex((s) => s.name === a) -
              bundle.strategies.findIndex((s) => s.name === b),
        );
      expect(ranking.map((r) => r.name)).toEqual(expected);
    });

    it(`single-metric weights reproduce that metric's normalized order (${label})`, () => {
      const bundle = loadGoldenBundle(label);
      for (const metric of bundle.metrics) {
        const order = metricOrder(bundle, metric.name);
        const scores = order.map((name) => meanNormalized(bundle, name, metric.name));
        for (let i = 1; i < scores.length; i++) {
          expect(scores[i - 1]).toBeGreaterThanOrEqual(scores[i] - 1e-12);
        }
      }
    });
  }
});

describe("exported weights round-trip through the engine", () => {
  const rankings = loadCliRankings();
  for (const label of GOLDEN_LABELS) {
    it(`recompose predicts the CLI re-run ranking (${label})`, () => {
      const bundle = loadGoldenBundle(label);
      for (const fixture of rankings[label]) {
        const predicted = recompose(bundle, fixture.weights).map((r) => r.name);
        expect(predicted).toEqual(fixture.cli_ranking);
      }
    });
  }
});

describe("weight handling", () => {
  it("normalizes sliders onto the simplex in metric order", () => {
    const bundle = loadGoldenBundle("lending0");
    const sliders: Record<string, number> = {};
    bundle.metrics.forEach((m, i) => (sliders[m.name] = i + 1));
    const weights = normalizeWeights(bundle, sliders);
    const total = bundle.metrics.reduce((acc, m) => acc + weights[m.name], 0);
    expect(total).toBeCloseTo(1.0, 12);
  });

  it("falls back to bundle weights when all sliders are zero", () => {
    const bundle = loadGoldenBundle("lending0");
    const weights = normalizeWeights(bundle, {});
    expect(weights).toEqual(bundle.weights);
  });
});

describe("crossover annotations", () => {
  it("reports crossings strictly inside the sweep where composites tie", () => {
    const bundle = loadGoldenBundle("lending0");
    const w0 = bundle.weights;
    const w1: Record<string, number> = {};
    for (const m of bundle.metrics) w1[m.name] = 0;
    w1["Demographic_Parity"] = 1;
    const crossings = crossoverWeights(bundle, w0, w1);
    for (const c of crossings) {
      expect(c.alpha).toBeGreaterThan(0);
      expect(c.alpha).toBeLessThan(1);
      const mixed: Record<string, number> = {};
      for (const m of bundle.metrics) {
        mixed[m.name] = (1 - c.alpha) * w0[m.name] + c.alpha * w1[m.name];
      }
      const gap = compositeOf(bundle, c.a, mixed) - compositeOf(bundle, c.b, mixed);
      expect(Math.abs(gap)).toBeLessThanOrEqual(1e-9);
    }
  });

  it("winner changes only at computed crossover points", () => {
    const bundle = loadGoldenBundle("lending0");
    const w0 = bundle.weights;
    const w1: Record<string, number> = {};
    for (const m of bundle.metrics) w1[m.name] = 0;
    w1["Total_Profit"] = 1;
    const crossings = crossoverWeights(bundle, w0, w1);
    let previous = recompose(bundle, w0)[0].name;
    let changes = 0;
    for (let step = 1; step <= 64; step++) {
      const alpha = step / 64;
      const mixed: Record<string, number> = {};
      for (const m of bundle.metrics) {
        mixed[m.name] = (1 - alpha) * w0[m.name] + alpha * w1[m.name];
      }
      const winner = recompose(bundle, mixed)[0].name;
      if (winner !== previous) {
        changes++;
        const bracket = crossings.some(
          (c) => c.alpha > alpha - 1 / 64 - 1e-12 && c.alpha < alpha + 1e-12,
        );
        expect(bracket).toBe(true);
        previous = winner;
      }
    }
    // sanity: the sweep is non-trivial for this bundle
    expect(changes + crossings.length).toBeGreaterThan(0);
  });
});
