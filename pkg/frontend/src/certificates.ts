/** Certificate-grid lookup.
 *
 * Robustness numbers are precomputed by the certify command; the browser
 * only fetches grid points and renders them.  Off-grid requests surface an
 * explicit "not computed" state with the CLI invocation that would fill
 * the gap, never an interpolation presented as fact.
 */

import { CertificatesDoc, CertGridEntry, CERT_SCHEMA } from "./types.js";

export type CertLoad =
  | { ok: true; doc: CertificatesDoc }
  | { ok: false; message: string };

export function parseCertificates(doc: unknown): CertLoad {
  if (typeof doc !== "object" || doc === null) {
    return { ok: false, message: "not a JSON object" };
  }
  const certs = doc as CertificatesDoc;
  if (certs.schema !== CERT_SCHEMA) {
    return {
      ok: false,
      message: `certificate schema ${String(certs.schema)} does not match ${CERT_SCHEMA}`,
    };
  }
  return { ok: true, doc: certs };
}

function sameCoalition(a: string[] | undefined, b: string[]): boolean {
  const left = [...(a ?? [])].sort();
  const right = [...b].sort();
  return left.length === right.length && left.every((v, i) => v === right[i]);
}

export type WhatIf =
  | { computed: true; entry: CertGridEntry }
  | { computed: false; hint: string };

export function whatIfCertificate(
  doc: CertificatesDoc,
  delta: number,
  coalition: string[],
): WhatIf {
  const candidates = [
    { ...doc.report, coalition: doc.report.coalition ?? doc.coalition },
    ...doc.grid,
  ];
  for (const entry of candidates) {
    if (Math.abs(entry.delta - delta) <= 1e-12 && sameCoalition(entry.coalition, coalition)) {
      return { computed: true, entry };
    }
  }
  return { computed: false, hint: regenerateHint(delta, coalition, doc.mu) };
}

export function regenerateHint(delta: number, coalition: string[], mu: number): string {
  return (
    `concord certify --bundle bundle.json --delta ${delta} ` +
    `--coalition ${coalition.join(",")} --mu ${mu}`
  );
}

/** Grid deltas available for one coalition, ascending (for the slider). */
export function gridDeltas(doc: CertificatesDoc, coalition: string[]): number[] {
  const out: number[] = [];
  for (const entry of [{ ...doc.report, coalition: doc.report.coalition ?? doc.coalition }, ...doc.grid]) {
    if (sameCoalition(entry.coalition, coalition) && !out.includes(entry.delta)) {
      out.push(entry.delta);
    }
  }
  return out.sort((a, b) => a - b);
}

export function gridCoalitions(doc: CertificatesDoc): string[][] {
  const seen = new Map<string, string[]>();
  seen.set([...doc.coalition].sort().join("|"), doc.coalition);
  for (const entry of doc.grid) {
    const names = entry.coalition ?? doc.coalition;
    seen.set([...names].sort().join("|"), names);
  }
  return [...seen.values()];
}
