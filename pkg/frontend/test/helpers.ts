import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { parseBundle } from "../src/bundle.js";
import { Bundle, CertificatesDoc } from "../src/types.js";

const golden = join(dirname(fileURLToPath(import.meta.url)), "golden");

export function loadGoldenBundle(label: string): Bundle {
  const doc = JSON.parse(readFileSync(join(golden, `bundle_${label}.json`), "utf-8"));
  const load = parseBundle(doc);
  if (!load.ok) throw new Error(`golden bundle ${label} failed to parse: ${load.message}`);
  return load.bundle;
}

export function loadGoldenJson(name: string): unknown {
  return JSON.parse(readFileSync(join(golden, name), "utf-8"));
}

export function loadGoldenCertificates(): CertificatesDoc {
  return loadGoldenJson("certs_lending0.json") as CertificatesDoc;
}

export interface RankingFixture {
  weights: Record<string, number>;
  cli_ranking: string[];
}

export function loadCliRankings(): Record<string, RankingFixture[]> {
  return loadGoldenJson("cli_rankings.json") as Record<string, RankingFixture[]>;
}

export const GOLDEN_LABELS = ["lending0", "lending_strict", "health"] as const;
