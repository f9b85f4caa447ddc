/** Client-side re-aggregation of stored normalized scores.
 *
 * The browser never recomputes normalized scores (they are relative to the
 * strategy set and fixed by the bundle); the only arithmetic here is the
 * linear composite and the linear crossover equation between strategies.
 */

import { Bundle, RankedStrategy } from "./types.js";

/** Normalize slider values onto the metric simplex, in metric order. */
export function normalizeWeights(
  bundle: Bundle,
  sliders: Record<string, number>,
): Record<string, number> {
  let total = 0;
  for (const m of bundle.metrics) total += Math.max(sliders[m.name] ?? 0, 0);
  const weights: Record<string, number> = {};
  if (total <= 0) {
    // degenerate slider state: fall back to the bundle's own weights
    for (const m of bundle.metrics) weights[m.name] = bundle.weights[m.name];
    return weights;
  }
  for (const m of bundle.metrics) weights[m.name] = Math.max(sliders[m.name] ?? 0, 0) / total;
  return weights;
}

/** Per-fold composite then mean across folds, mirroring the engine. */
export function compositeOf(
  bundle: Bundle,
  strategy: string,
  weights: Record<string, number>,
): number {
  let total = 0;
  for (const fold of bundle.folds) {
    let c = 0;
    for (const m of bundle.metrics) c += weights[m.name] * fold.normalized[strategy][m.name];
    total += c;
  }
  return total / bundle.folds.length;
}

export function recompose(bundle: Bundle, weights: Record<string, number>): RankedStrategy[] {
  const ranked: RankedStrategy[] = bundle.strategies.map((s) => {
    const perMetric: Record<string, number> = {};
    for (const m of bundle.metrics) {
      let total = 0;
      for (const fold of bundle.folds) total += fold.normalized[s.name][m.name];
      perMetric[m.name] = total / bundle.folds.length;
    }
    return { name: s.name, composite: compositeOf(bundle, s.name, weights), perMetric };
  });
  // stable sort: ties keep strategy-set order, matching the engine's tie rule
  return ranked
    .map((r, i) => [r, i] as const)
    .sort((a, b) => b[0].composite - a[0].composite || a[1] - b[1])
    .map(([r]) => r);
}

/** Largest deviation between recomputed and stored composites at the
 * bundle's own weights; the consistency contract keeps this below 1e-9. */
export function storedCompositeDeviation(bundle: Bundle): number {
  let worst = 0;
  for (const s of bundle.strategies) {
    const recomputed = compositeOf(bundle, s.name, bundle.weights);
    worst = Math.max(worst, Math.abs(recomputed - bundle.mean_composite[s.name]));
  }
  return worst;
}

/** Ranking by one metric's stored normalized scores (all weight on it). */
export function metricOrder(bundle: Bundle, metric: string): string[] {
  const weights: Record<string, number> = {};
  for (const m of bundle.metrics) weights[m.name] = m.name === metric ? 1 : 0;
  return recompose(bundle, weights).map((r) => r.name);
}

export interface Crossover {
  alpha: number;
  a: string;
  b: string;
}

/** Winner-change points along the segment w(alpha) = (1-a) w0 + a w1.
 *
 * Composites are linear in alpha, so two strategies tie where the linear
 * gap changes sign; only crossings strictly inside (0, 1) are reported.
 */
export function crossoverWeights(
  bundle: Bundle,
  w0: Record<string, number>,
  w1: Record<string, number>,
): Crossover[] {
  const names = bundle.strategies.map((s) => s.name);
  const at0: Record<string, number> = {};
  const at1: Record<string, number> = {};
  for (const name of names) {
    at0[name] = compositeOf(bundle, name, w0);
    at1[name] = compositeOf(bundle, name, w1);
  }
  const out: Crossover[] = [];
  for (let i = 0; i < names.length; i++) {
    for (let j = i + 1; j < names.length; j++) {
      const g0 = at0[names[i]] - at0[names[j]];
      const g1 = at1[names[i]] - at1[names[j]];
      if (g0 === g1) continue; // parallel: no crossing
      const alpha = g0 / (g0 - g1);
      if (alpha > 0 && alpha < 1) {
        out.push({ alpha, a: names[i], b: names[j] });
      }
    }
  }
  return out.sort((x, y) => x.alpha - y.alpha);
}
