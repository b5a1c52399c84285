/**
 * One SVG per monitored invariant from a run directory's artifacts:
 *
 *   drift_band.svg           drift extremes vs the initial-data band
 *   eigenvalue_envelope.svg  spectral extremes vs the envelope bounds
 *   obliqueness.svg          boundary obliqueness minimum
 *   structure_bands.svg      structure sums vs their band constants
 *   stationarity.svg         operator spread, log scale
 *   gradient_image.svg       gradient-map scatter over the target outline
 *
 * Runs that ended in a violation get the final record marked in red.
 */

import { mkdirSync, writeFileSync } from "fs";
import path from "path";

import { effectiveSemiAxes, loadArtifacts, RunArtifacts } from "./artifacts.js";
import { buildChart, VLine } from "./svg.js";

type Bounds = [number, number] | null | undefined;

function bandBounds(art: RunArtifacts, key: "bounds_fp" | "bounds_fpl2"): Bounds {
  const chk = art.summary.checks["structure_band"];
  if (!chk) return null;
  return chk[key] as Bounds;
}

function violationMarker(art: RunArtifacts): VLine[] {
  if (art.summary.termination !== "invariant-violation") return [];
  const last = art.timeseries[art.timeseries.length - 1];
  return [{ value: last.t, color: "#d62728", label: "violation step" }];
}

function prec(v: unknown): string {
  return typeof v === "number" && Number.isFinite(v) ? v.toPrecision(6) : "n/a";
}

export function render(runDir: string, outDir: string): string[] {
  const art = loadArtifacts(runDir);
  mkdirSync(outDir, { recursive: true });
  const ts = art.timeseries;
  const t = ts.map((r) => r.t);
  const marks = violationMarker(art);
  const files: string[] = [];

  const save = (name: string, svg: string): void => {
    const file = path.join(outDir, name);
    writeFileSync(file, svg);
    files.push(file);
  };

  save("drift_band.svg", buildChart({
    title: `Drift band (${art.summary.profile})`,
    xLabel: "t",
    yLabel: "du/dt extremes",
    series: [
      { xs: t, ys: ts.map((r) => r.udot_min), color: "#1f77b4", label: "min drift" },
      { xs: t, ys: ts.map((r) => r.udot_max), color: "#ff7f0e", label: "max drift" },
    ],
    hLines: [
      { value: art.summary.theta0, color: "#2ca02c", label: `theta0 = ${prec(art.summary.theta0)}` },
      { value: art.summary.theta1, color: "#9467bd", label: `theta1 = ${prec(art.summary.theta1)}` },
    ],
    vLines: marks,
  }));

  save("eigenvalue_envelope.svg", buildChart({
    title: "Hessian eigenvalue extremes vs envelope",
    xLabel: "t",
    yLabel: "eigenvalue",
    series: [
      { xs: t, ys: ts.map((r) => r.lam_min), color: "#1f77b4", label: "smallest eigenvalue" },
      { xs: t, ys: ts.map((r) => r.lam_max), color: "#ff7f0e", label: "largest eigenvalue" },
    ],
    hLines: [
      { value: art.summary.mu1, color: "#2ca02c", label: `mu1 = ${prec(art.summary.mu1)}` },
      { value: art.summary.mu2, color: "#9467bd", label: `mu2 = ${prec(art.summary.mu2)}` },
    ],
    vLines: marks,
  }));

  save("obliqueness.svg", buildChart({
    title: "Boundary obliqueness minimum",
    xLabel: "t",
    yLabel: "min <beta, nu>",
    series: [
      { xs: t, ys: ts.map((r) => r.obliq_min), color: "#1f77b4", label: "min <beta, nu>" },
    ],
    hLines: [{ value: 0, color: "#d62728", label: "zero (must stay above)" }],
    vLines: marks,
  }));

  const fp = bandBounds(art, "bounds_fp");
  const fpl2 = bandBounds(art, "bounds_fpl2");
  const prov = (art.summary.checks["structure_band"]?.["provenance"] as string) ?? "n/a";
  save("structure_bands.svg", buildChart({
    title: `Structure sums vs band constants (${prov})`,
    xLabel: "t",
    yLabel: "structure sums (worst node)",
    series: [
      { xs: t, ys: ts.map((r) => r.band_sum_fp), color: "#1f77b4", label: "sum f'(lambda)" },
      { xs: t, ys: ts.map((r) => r.band_sum_fpl2), color: "#ff7f0e", label: "sum f'(lambda) lambda^2" },
    ],
    hLines: [
      ...(fp ? [
        { value: fp[0], color: "#2ca02c", label: `sum f' band [${fp[0].toPrecision(4)}, ${fp[1].toPrecision(4)}]` },
        { value: fp[1], color: "#2ca02c", label: "", dash: "2,3" },
      ] : []),
      ...(fpl2 ? [
        { value: fpl2[0], color: "#9467bd", label: `sum f' l^2 band [${fpl2[0].toPrecision(4)}, ${fpl2[1].toPrecision(4)}]` },
        { value: fpl2[1], color: "#9467bd", label: "", dash: "2,3" },
      ] : []),
    ],
    vLines: marks,
  }));

  save("stationarity.svg", buildChart({
    title: "Stationarity residual",
    xLabel: "t",
    yLabel: "max |F - mean F|",
    logY: true,
    series: [
      { xs: t, ys: ts.map((r) => r.stat_residual), color: "#1f77b4", label: "stationarity residual" },
    ],
    vLines: marks,
  }));

  const [a, b] = effectiveSemiAxes(art.config.target);
  const n = 256;
  const ox: number[] = [];
  const oy: number[] = [];
  for (let i = 0; i < n; i++) {
    const ang = (2 * Math.PI * i) / n;
    ox.push(a * Math.cos(ang));
    oy.push(b * Math.sin(ang));
  }
  save("gradient_image.svg", buildChart({
    title: "Gradient image over the target outline",
    xLabel: "du/dx1",
    yLabel: "du/dx2",
    equalAspect: true,
    scatters: [{
      xs: art.field.map((r) => r.du1),
      ys: art.field.map((r) => r.du2),
      color: "#1f77b4",
      label: `gradient image (${art.field.length} nodes)`,
    }],
    outlines: [{ xs: ox, ys: oy, color: "#d62728", label: "target boundary" }],
  }));

  return files;
}
