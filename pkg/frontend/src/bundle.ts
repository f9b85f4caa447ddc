/** Bundle loading and validation. */

import { Bundle, BUNDLE_SCHEMA } from "./types.js";

export type BundleLoad =
  | { ok: true; bundle: Bundle }
  | { ok: false; stale: boolean; message: string };

export function parseBundle(doc: unknown): BundleLoad {
  if (typeof doc !== "object" || doc === null) {
    return { ok: false, stale: false, message: "not a JSON object" };
  }
  const bundle = doc as Bundle;
  if (bundle.schema !== BUNDLE_SCHEMA) {
    return {
      ok: false,
      stale: true,
      message: `bundle schema ${String(bundle.schema)} does not match ${BUNDLE_SCHEMA}; ` +
        "regenerate it with this version's select command (read-only display)",
    };
  }
  for (const field of ["strategies", "metrics", "weights", "folds", "mean_composite"]) {
    if (!(field in bundle)) {
      return { ok: false, stale: false, message: `bundle is missing '${field}'` };
    }
  }
  if (bundle.folds.length === 0) {
    return { ok: false, stale: false, message: "bundle has no folds" };
  }
  return { ok: true, bundle };
}

/** Mean normalized score of one strategy on one metric across folds. */
export function meanNormalized(bundle: Bundle, strategy: string, metric: string): number {
  let total = 0;
  for (const fold of bundle.folds) total += fold.normalized[strategy][metric];
  return total / bundle.folds.length;
}

/** JSON path of a normalized score, for provenance tooltips. */
export function normalizedScorePath(fold: number, strategy: string, metric: string): string {
  return `/folds/${fold}/normalized/${strategy}/${metric}`;
}
