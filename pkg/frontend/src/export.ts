/** Export documents the CLI consumes directly. */

import { PERTURBATION_SCHEMA, WEIGHTS_SCHEMA } from "./types.js";

export function weightsDocument(weights: Record<string, number>): string {
  return JSON.stringify({ schema: WEIGHTS_SCHEMA, weights }, null, 1);
}

export interface PerturbationExport {
  delta: number;
  mu: number;
  coalition: string[];
  tauMode: "optimal" | "fixed";
  tauValue?: number;
}

export function perturbationDocument(p: PerturbationExport): string {
  const tau =
    p.tauMode === "fixed" ? { mode: "fixed", value: p.tauValue ?? 0.1 } : { mode: "optimal" };
  return JSON.stringify(
    {
      schema: PERTURBATION_SCHEMA,
      delta: p.delta,
      mu: p.mu,
      coalition: p.coalition,
      tau,
    },
    null,
    1,
  );
}
