/**
 * Minimal deterministic SVG chart builder: line series over time, dashed
 * reference lines at monitored constants, and point scatters.  Axis ranges
 * derive from the data with 5% padding, so identical inputs re-render to
 * identical bytes.
 */

export interface Series {
  xs: number[];
  ys: number[];
  color: string;
  label: string;
  width?: number;
  dash?: string;
}

export interface HLine {
  value: number;
  color: string;
  label: string;
  dash?: string;
}

export interface VLine {
  value: number;
  color: string;
  label: string;
}

export interface Scatter {
  xs: number[];
  ys: number[];
  color: string;
  label: string;
  radius?: number;
}

export interface Outline {
  xs: number[];
  ys: number[];
  color: string;
  label: string;
}

export interface ChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series?: Series[];
  hLines?: HLine[];
  vLines?: VLine[];
  scatters?: Scatter[];
  outlines?: Outline[];
  logY?: boolean;
  equalAspect?: boolean;
}

const W = 720;
const H = 440;
const ML = 76;
const MR = 24;
const MT = 48;
const MB = 56;

function fmt(v: number): string {
  if (!Number.isFinite(v)) return "0";
  return Number(v.toPrecision(6)).toString();
}

function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(1);
  return Number(v.toPrecision(4)).toString();
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function ticks(lo: number, hi: number, n = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step0 = span / n;
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= n + 1) ?? mag * 10;
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + 1e-12 * span; v += step) {
    out.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return out;
}

export function buildChart(spec: ChartSpec): string {
  const logY = spec.logY ?? false;
  const ty = (v: number): number => (logY ? Math.log10(Math.max(v, 1e-17)) : v);

  const xsAll: number[] = [];
  const ysAll: number[] = [];
  for (const s of spec.series ?? []) {
    for (let i = 0; i < s.xs.length; i++) {
      if (Number.isFinite(s.xs[i]) && Number.isFinite(s.ys[i])) {
        xsAll.push(s.xs[i]);
        ysAll.push(ty(s.ys[i]));
      }
    }
  }
  for (const s of spec.scatters ?? []) {
    for (let i = 0; i < s.xs.length; i++) {
      xsAll.push(s.xs[i]);
      ysAll.push(ty(s.ys[i]));
    }
  }
  for (const o of spec.outlines ?? []) {
    for (let i = 0; i < o.xs.length; i++) {
      xsAll.push(o.xs[i]);
      ysAll.push(ty(o.ys[i]));
    }
  }
  for (const l of spec.hLines ?? []) {
    if (Number.isFinite(l.value)) ysAll.push(ty(l.value));
  }
  let xLo = Math.min(...xsAll);
  let xHi = Math.max(...xsAll);
  let yLo = Math.min(...ysAll);
  let yHi = Math.max(...ysAll);
  if (!Number.isFinite(xLo)) { xLo = 0; xHi = 1; }
  if (!Number.isFinite(yLo)) { yLo = 0; yHi = 1; }
  if (xHi - xLo < 1e-12) { xHi += 0.5; xLo -= 0.5; }
  if (yHi - yLo < 1e-12) { yHi += 0.5; yLo -= 0.5; }
  const padX = 0.05 * (xHi - xLo);
  const padY = 0.05 * (yHi - yLo);
  xLo -= padX; xHi += padX; yLo -= padY; yHi += padY;
  if (spec.equalAspect) {
    const spanX = xHi - xLo;
    const spanY = yHi - yLo;
    const plotW = W - ML - MR;
    const plotH = H - MT - MB;
    const unit = Math.max(spanX / plotW, spanY / plotH);
    const cx = 0.5 * (xLo + xHi);
    const cy = 0.5 * (yLo + yHi);
    xLo = cx - 0.5 * unit * plotW; xHi = cx + 0.5 * unit * plotW;
    yLo = cy - 0.5 * unit * plotH; yHi = cy + 0.5 * unit * plotH;
  }

  const px = (x: number): number => ML + ((x - xLo) / (xHi - xLo)) * (W - ML - MR);
  const py = (y: number): number => H - MB - ((y - yLo) / (yHi - yLo)) * (H - MT - MB);

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}" font-family="Helvetica,Arial,sans-serif">`);
  parts.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  parts.push(`<text x="${W / 2}" y="24" text-anchor="middle" font-size="16" fill="#222">${esc(spec.title)}</text>`);

  // axes and ticks
  parts.push(`<rect x="${ML}" y="${MT}" width="${W - ML - MR}" height="${H - MT - MB}" fill="none" stroke="#999"/>`);
  for (const t of ticks(xLo, xHi)) {
    parts.push(`<line x1="${fmt(px(t))}" y1="${H - MB}" x2="${fmt(px(t))}" y2="${H - MB + 5}" stroke="#999"/>`);
    parts.push(`<text x="${fmt(px(t))}" y="${H - MB + 18}" text-anchor="middle" font-size="11" fill="#444">${fmtTick(t)}</text>`);
  }
  for (const t of ticks(yLo, yHi)) {
    const label = logY ? `1e${fmtTick(t)}` : fmtTick(t);
    parts.push(`<line x1="${ML - 5}" y1="${fmt(py(t))}" x2="${ML}" y2="${fmt(py(t))}" stroke="#999"/>`);
    parts.push(`<text x="${ML - 8}" y="${fmt(py(t) + 4)}" text-anchor="end" font-size="11" fill="#444">${label}</text>`);
  }
  parts.push(`<text x="${(ML + W - MR) / 2}" y="${H - 14}" text-anchor="middle" font-size="12" fill="#222">${esc(spec.xLabel)}</text>`);
  parts.push(`<text x="20" y="${(MT + H - MB) / 2}" text-anchor="middle" font-size="12" fill="#222" transform="rotate(-90 20 ${(MT + H - MB) / 2})">${esc(spec.yLabel)}</text>`);

  const clipId = "plot";
  parts.push(`<clipPath id="${clipId}"><rect x="${ML}" y="${MT}" width="${W - ML - MR}" height="${H - MT - MB}"/></clipPath>`);
  parts.push(`<g clip-path="url(#${clipId})">`);

  for (const l of spec.hLines ?? []) {
    if (!Number.isFinite(l.value)) continue;
    const y = fmt(py(ty(l.value)));
    parts.push(`<line x1="${ML}" y1="${y}" x2="${W - MR}" y2="${y}" stroke="${l.color}" stroke-dasharray="${l.dash ?? "6,4"}" stroke-width="1.2"/>`);
  }
  for (const l of spec.vLines ?? []) {
    const x = fmt(px(l.value));
    parts.push(`<line x1="${x}" y1="${MT}" x2="${x}" y2="${H - MB}" stroke="${l.color}" stroke-width="1.6"/>`);
  }
  for (const o of spec.outlines ?? []) {
    const pts = o.xs.map((x, i) => `${fmt(px(x))},${fmt(py(ty(o.ys[i])))}`).join(" ");
    parts.push(`<polygon points="${pts}" fill="none" stroke="${o.color}" stroke-width="1.5"/>`);
  }
  for (const s of spec.scatters ?? []) {
    const r = s.radius ?? 1.4;
    const dots = s.xs.map((x, i) =>
      `<circle cx="${fmt(px(x))}" cy="${fmt(py(ty(s.ys[i])))}" r="${r}" fill="${s.color}"/>`).join("");
    parts.push(dots);
  }
  for (const s of spec.series ?? []) {
    const pts: string[] = [];
    for (let i = 0; i < s.xs.length; i++) {
      if (Number.isFinite(s.xs[i]) && Number.isFinite(s.ys[i])) {
        pts.push(`${fmt(px(s.xs[i]))},${fmt(py(ty(s.ys[i])))}`);
      }
    }
    parts.push(`<polyline points="${pts.join(" ")}" fill="none" stroke="${s.color}" stroke-width="${s.width ?? 1.6}"${s.dash ? ` stroke-dasharray="${s.dash}"` : ""}/>`);
  }
  parts.push("</g>");

  // legend
  let ly = MT + 14;
  const legend: { color: string; label: string; dash?: string }[] = [];
  for (const s of spec.series ?? []) legend.push(s);
  for (const l of spec.hLines ?? []) legend.push({ ...l, dash: l.dash ?? "6,4" });
  for (const s of spec.scatters ?? []) legend.push(s);
  for (const o of spec.outlines ?? []) legend.push(o);
  for (const l of spec.vLines ?? []) legend.push(l);
  for (const item of legend) {
    parts.push(`<line x1="${ML + 10}" y1="${ly - 4}" x2="${ML + 34}" y2="${ly - 4}" stroke="${item.color}" stroke-width="2"${item.dash ? ` stroke-dasharray="${item.dash}"` : ""}/>`);
    parts.push(`<text x="${ML + 40}" y="${ly}" font-size="11" fill="#333">${esc(item.label)}</text>`);
    ly += 15;
  }

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
