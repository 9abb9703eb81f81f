import { escapeHtml, formatScore } from "./format.js";
import type { TraceView } from "./types.js";

/** Highlight intensity per token: w̃ scaled so the quote's own largest
 *  weight maps to 1.  A flat trace (all weights zero) stays unlit. */
export function heatIntensities(wTilde: number[]): number[] {
  const max = Math.max(0, ...wTilde);
  if (max <= 0) {
    return wTilde.map(() => 0);
  }
  return wTilde.map((w) => w / max);
}

/** Cap the background alpha below 1 so the token text stays readable
 *  on the hottest position. */
const MAX_ALPHA = 0.85;

/** One span per token.  Intensity drives the background; the tooltip
 *  carries the server's normalized weight and log-probability ratio for
 *  that position.  All numbers come straight from the trace. */
export function renderTokenHeatmap(trace: TraceView): string {
  const intensities = heatIntensities(trace.w_tilde);
  const spans = trace.token_texts.map((token, i) => {
    const intensity = intensities[i].toFixed(3);
    const alpha = (intensities[i] * MAX_ALPHA).toFixed(3);
    const title = `w̃=${formatScore(trace.w_tilde[i])} r=${formatScore(trace.r[i])}`;
    return (
      `<span class="heat-token" data-intensity="${intensity}"` +
      ` style="background: rgba(230, 126, 34, ${alpha})" title="${title}">` +
      `${escapeHtml(token)}</span>`
    );
  });
  const note = trace.truncated ? '<span class="heat-note">(trace truncated)</span>' : "";
  return `<div class="heatmap">${spans.join(" ")}${note}</div>`;
}
