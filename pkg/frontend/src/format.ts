import { SCORE_DECIMALS } from "./config.js";

/** Render a score for display.  Rounding happens here and only here so
 *  every number on screen carries the same precision. */
export function formatScore(value: number): string {
  return value.toFixed(SCORE_DECIMALS);
}

const HTML_ESCAPES: Record<string, string> = {
  "&": "&amp;",
  "<": "&lt;",
  ">": "&gt;",
  '"': "&quot;",
  "'": "&#39;",
};

/** Escape text destined for an HTML template string. */
export function escapeHtml(s: string): string {
  return s.replace(/[&<>"']/g, (ch) => HTML_ESCAPES[ch]);
}
