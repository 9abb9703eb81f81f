import { escapeHtml, formatScore } from "./format.js";
import { renderTokenHeatmap } from "./heatmap.js";
import type { ResultView, Weights } from "./types.js";

/** Stacked-bar widths (percent) for the three weighted contributions
 *  λ_n·s_n, λ_p·s_p and λ_m·s_m.  The component scores come from the
 *  server; the weights are the ones this client sent with the request.
 *  Negative contributions (a negative novelty score) get no bar width,
 *  and an all-zero total collapses the bar. */
export function contributionWidths(
  result: ResultView,
  weights: Weights,
): { n: number; p: number; m: number } {
  const part = (value: number): number => Math.max(0, value);
  const n = part(weights.lambda_n * result.s_n);
  const p = part(weights.lambda_p * result.s_p);
  const m = part(weights.lambda_m * result.s_m);
  const total = n + p + m;
  if (total <= 0) {
    return { n: 0, p: 0, m: 0 };
  }
  return { n: (100 * n) / total, p: (100 * p) / total, m: (100 * m) / total };
}

function renderScoreBar(result: ResultView, weights: Weights): string {
  const widths = contributionWidths(result, weights);
  const segment = (cls: string, width: number, label: string): string =>
    `<div class="bar-segment ${cls}" style="width: ${width.toFixed(1)}%" title="${label}"></div>`;
  return (
    '<div class="score-bar">' +
    segment("bar-n", widths.n, `novelty ${formatScore(result.s_n)}`) +
    segment("bar-p", widths.p, `popularity ${formatScore(result.s_p)}`) +
    segment("bar-m", widths.m, `match ${formatScore(result.s_m)}`) +
    "</div>"
  );
}

/** One ranked card.  `movement` is an optional badge from compare mode. */
export function renderResultCard(
  result: ResultView,
  weights: Weights,
  movement?: string,
): string {
  const quote = result.quotation;
  const attribution = quote.author ? `<span class="card-author">${escapeHtml(quote.author)}</span>` : "";
  const meaning = quote.deep_meaning
    ? `<p class="card-meaning">${escapeHtml(quote.deep_meaning)}</p>`
    : "";
  const badge = movement ? `<span class="movement">${escapeHtml(movement)}</span>` : "";
  return (
    `<article class="card" data-quote-id="${escapeHtml(quote.id)}">` +
    `<header class="card-header"><span class="card-rank">#${result.rank}</span>${badge}` +
    `<span class="card-final">${formatScore(result.s_final)}</span></header>` +
    `<blockquote class="card-text">${escapeHtml(quote.text)}</blockquote>` +
    attribution +
    meaning +
    renderScoreBar(result, weights) +
    `<div class="card-scores">n ${formatScore(result.s_n)} · p ${formatScore(result.s_p)}` +
    ` · m ${formatScore(result.s_m)}</div>` +
    renderTokenHeatmap(result.trace) +
    "</article>"
  );
}

/** The ranked list.  Results render in the order the server returned
 *  them; this module never sorts. */
export function renderResultsList(
  results: ResultView[],
  weights: Weights,
  movements?: Map<string, string>,
): string {
  if (results.length === 0) {
    return '<p class="empty">No recommendations for this context.</p>';
  }
  return results
    .map((r) => renderResultCard(r, weights, movements?.get(r.quotation.id)))
    .join("\n");
}
