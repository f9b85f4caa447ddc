/** DOM wiring for the decision desk.
 *
 * All derived state is recomputed synchronously on control change; the
 * only arithmetic on this side is the linear recomposition and crossover
 * solving in recompose.ts.  Every nonlinear number on screen comes from a
 * bundle or certificate field and carries its JSON path as a tooltip.
 */

import { meanNormalized, normalizedScorePath, parseBundle } from "./bundle.js";
import {
  gridCoalitions,
  gridDeltas,
  parseCertificates,
  whatIfCertificate,
} from "./certificates.js";
import { perturbationDocument, weightsDocument } from "./export.js";
import {
  crossoverWeights,
  normalizeWeights,
  recompose,
  storedCompositeDeviation,
} from "./recompose.js";
import { Bundle, CertificatesDoc } from "./types.js";

interface DeskState {
  bundle: Bundle | null;
  readOnly: boolean;
  sliders: Record<string, number>;
  certificates: CertificatesDoc | null;
  certDelta: number | null;
  certCoalition: string[] | null;
}

const state: DeskState = {
  bundle: null,
  readOnly: false,
  sliders: {},
  certificates: null,
  certDelta: null,
  certCoalition: null,
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function banner(message: string, kind: "info" | "warn") {
  const box = el<HTMLDivElement>("banner");
  box.textContent = message;
  box.className = message ? `banner ${kind}` : "banner hidden";
}

// ---------------------------------------------------------------------------
// bundle loading

async function onBundleFile(file: File) {
  const text = await file.text();
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (err) {
    banner(`could not parse ${file.name}: ${String(err)}`, "warn");
    return;
  }
  const load = parseBundle(doc);
  if (!load.ok) {
    state.bundle = null;
    state.readOnly = load.stale;
    banner(load.message, "warn");
    return;
  }
  state.bundle = load.bundle;
  state.readOnly = false;
  state.sliders = { ...load.bundle.weights };
  const deviation = storedCompositeDeviation(load.bundle);
  banner(
    deviation <= 1e-9
      ? `loaded ${file.name}: recomposition matches stored composites (max dev ${deviation.toExponential(2)})`
      : `loaded ${file.name}: WARNING stored composites deviate by ${deviation.toExponential(2)}`,
    deviation <= 1e-9 ? "info" : "warn",
  );
  renderSliders();
  renderRanking();
}

async function onCertFile(file: File) {
  const text = await file.text();
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (err) {
    banner(`could not parse ${file.name}: ${String(err)}`, "warn");
    return;
  }
  const load = parseCertificates(doc);
  if (!load.ok) {
    banner(load.message, "warn");
    return;
  }
  state.certificates = load.doc;
  state.certCoalition = load.doc.coalition;
  state.certDelta = load.doc.report.delta;
  renderCertificateControls();
  renderCertificates();
}

// ---------------------------------------------------------------------------
// weights and ranking

function renderSliders() {
  const bundle = state.bundle;
  if (!bundle) return;
  const host = el<HTMLDivElement>("sliders");
  host.innerHTML = "";
  for (const metric of bundle.metrics) {
    const row = document.createElement("div");
    row.className = "slider-row";
    const label = document.createElement("label");
    label.textContent = metric.name + (metric.report_only ? " (report-only)" : "");
    label.title = `/metrics -> ${metric.name}, orientation ${metric.orientation}`;
    const input = document.createElement("input");
    input.type = "range";
    input.min = "0";
    input.max = "1";
    input.step = "0.01";
    input.value = String(state.sliders[metric.name] ?? 0);
    input.disabled = state.readOnly;
    const value = document.createElement("span");
    const weights = normalizeWeights(bundle, state.sliders);
    value.textContent = weights[metric.name].toFixed(3);
    input.addEventListener("input", () => {
      state.sliders[metric.name] = Number(input.value);
      renderSliders();
      renderRanking();
    });
    row.append(label, input, value);
    host.append(row);
  }
}

function renderRanking() {
  const bundle = state.bundle;
  if (!bundle) return;
  const weights = normalizeWeights(bundle, state.sliders);
  const ranking = recompose(bundle, weights);
  const host = el<HTMLDivElement>("ranking");
  host.innerHTML = "";
  const winner = ranking[0]?.name;
  for (const entry of ranking) {
    const row = document.createElement("div");
    row.className = "rank-row" + (entry.name === winner ? " winner" : "");
    const name = document.createElement("span");
    name.className = "rank-name";
    name.textContent = entry.name;
    name.title = `composite = sum over metrics of weight x mean fold-normalized score`;
    const bar = document.createElement("div");
    bar.className = "bar";
    const fill = document.createElement("div");
    fill.className = "fill";
    fill.style.width = `${Math.max(entry.composite, 0) * 100}%`;
    bar.append(fill);
    const score = document.createElement("span");
    score.className = "rank-score";
    score.textContent = entry.composite.toFixed(4);
    row.append(name, bar, score);
    row.addEventListener("click", () => renderTradeoffs(entry.name));
    host.append(row);
  }
  if (winner) renderTradeoffs(winner);
  renderCrossovers(weights);
}

function renderTradeoffs(strategy: string) {
  const bundle = state.bundle;
  if (!bundle) return;
  el<HTMLHeadingElement>("tradeoff-title").textContent = `per-metric scores: ${strategy}`;
  const host = el<HTMLDivElement>("tradeoffs");
  host.innerHTML = "";
  for (const metric of bundle.metrics) {
    const value = meanNormalized(bundle, strategy, metric.name);
    const row = document.createElement("div");
    row.className = "rank-row";
    const name = document.createElement("span");
    name.className = "rank-name";
    name.textContent = metric.name;
    name.title = bundle.folds
      .map((fold) => normalizedScorePath(fold.fold, strategy, metric.name))
      .join("\n");
    const bar = document.createElement("div");
    bar.className = "bar";
    const fill = document.createElement("div");
    fill.className = "fill metric";
    fill.style.width = `${value * 100}%`;
    bar.append(fill);
    const score = document.createElement("span");
    score.className = "rank-score";
    score.textContent = value.toFixed(4);
    row.append(name, bar, score);
    host.append(row);
  }
}

function renderCrossovers(current: Record<string, number>) {
  const bundle = state.bundle;
  if (!bundle) return;
  const host = el<HTMLDivElement>("crossovers");
  const crossings = crossoverWeights(bundle, bundle.weights, current);
  if (crossings.length === 0) {
    host.textContent = "no winner changes between the bundle weights and the current weights";
    return;
  }
  host.innerHTML = "";
  for (const c of crossings.slice(0, 8)) {
    const div = document.createElement("div");
    div.textContent = `at ${(c.alpha * 100).toFixed(1)}% of the way: ${c.a} ties ${c.b}`;
    host.append(div);
  }
}

// ---------------------------------------------------------------------------
// certificates

function renderCertificateControls() {
  const doc = state.certificates;
  if (!doc) return;
  const coalitionSel = el<HTMLSelectElement>("cert-coalition");
  coalitionSel.innerHTML = "";
  for (const coalition of gridCoalitions(doc)) {
    const option = document.createElement("option");
    option.value = coalition.join(",");
    option.textContent = coalition.join(" + ");
    coalitionSel.append(option);
  }
  coalitionSel.value = (state.certCoalition ?? doc.coalition).join(",");
  coalitionSel.onchange = () => {
    state.certCoalition = coalitionSel.value.split(",");
    renderDeltaOptions();
    renderCertificates();
  };
  renderDeltaOptions();
}

function renderDeltaOptions() {
  const doc = state.certificates;
  if (!doc) return;
  const deltaSel = el<HTMLSelectElement>("cert-delta");
  const coalition = state.certCoalition ?? doc.coalition;
  deltaSel.innerHTML = "";
  for (const delta of gridDeltas(doc, coalition)) {
    const option = document.createElement("option");
    option.value = String(delta);
    option.textContent = delta.toPrecision(3);
    deltaSel.append(option);
  }
  if (deltaSel.options.length > 0) {
    state.certDelta = Number(deltaSel.options[0].value);
    deltaSel.value = deltaSel.options[0].value;
  }
  deltaSel.onchange = () => {
    state.certDelta = Number(deltaSel.value);
    renderCertificates();
  };
}

function renderCertificates() {
  const doc = state.certificates;
  const host = el<HTMLDivElement>("certificates");
  if (!doc || state.certDelta === null) return;
  const coalition = state.certCoalition ?? doc.coalition;
  const result = whatIfCertificate(doc, state.certDelta, coalition);
  host.innerHTML = "";
  if (!result.computed) {
    const div = document.createElement("div");
    div.className = "not-computed";
    div.textContent = `not computed for this grid point; run: ${result.hint}`;
    host.append(div);
    return;
  }
  const entry = result.entry;
  const verdict = document.createElement("div");
  verdict.className = `verdict ${entry.ranking.verdict}`;
  verdict.textContent =
    `ranking ${entry.ranking.verdict} (gap ${entry.ranking.min_gap.toPrecision(3)} ` +
    `vs error ${entry.ranking.max_pair_error.toPrecision(3)})`;
  verdict.title = "/grid/.../ranking";
  host.append(verdict);
  for (const [phi, cert] of Object.entries(entry.rules)) {
    const row = document.createElement("div");
    row.className = "rank-row";
    const name = document.createElement("span");
    name.className = "rank-name";
    name.textContent = phi;
    name.title = `/grid entry rules/${phi}: rlb = smooth - gradient - curvature - bias; tau* = ${cert.tau_star.toPrecision(4)}`;
    const bar = document.createElement("div");
    bar.className = "bar";
    const smooth = document.createElement("div");
    smooth.className = "fill smooth";
    smooth.style.width = `${Math.min(Math.max(cert.smooth_score, 0), 1) * 100}%`;
    const rlb = document.createElement("div");
    rlb.className = "fill rlb";
    rlb.style.width = `${Math.min(Math.max(cert.rlb, 0), 1) * 100}%`;
    bar.append(smooth, rlb);
    const score = document.createElement("span");
    score.className = "rank-score";
    score.textContent = `RLB ${cert.rlb.toFixed(3)} | S ${cert.smooth_score.toFixed(3)}`;
    row.append(name, bar, score);
    host.append(row);
  }
}

// ---------------------------------------------------------------------------
// exports

function download(name: string, body: string) {
  const blob = new Blob([body], { type: "application/json" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = name;
  a.click();
  URL.revokeObjectURL(a.href);
}

export function wire() {
  el<HTMLInputElement>("bundle-file").addEventListener("change", (event) => {
    const file = (event.target as HTMLInputElement).files?.[0];
    if (file) void onBundleFile(file);
  });
  el<HTMLInputElement>("cert-file").addEventListener("change", (event) => {
    const file = (event.target as HTMLInputElement).files?.[0];
    if (file) void onCertFile(file);
  });
  el<HTMLButtonElement>("export-weights").addEventListener("click", () => {
    if (!state.bundle) return;
    download("weights.json", weightsDocument(normalizeWeights(state.bundle, state.sliders)));
  });
  el<HTMLButtonElement>("export-perturbation").addEventListener("click", () => {
    const doc = state.certificates;
    if (!doc || state.certDelta === null) return;
    download(
      "perturbation.json",
      perturbationDocument({
        delta: state.certDelta,
        mu: doc.mu,
        coalition: state.certCoalition ?? doc.coalition,
        tauMode: "optimal",
      }),
    );
  });
  el<HTMLButtonElement>("reset-weights").addEventListener("click", () => {
    if (!state.bundle) return;
    state.sliders = { ...state.bundle.weights };
    renderSliders();
    renderRanking();
  });
}

if (typeof document !== "undefined" && document.getElementById("bundle-file")) {
  wire();
}
