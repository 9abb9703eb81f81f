import { DEFAULT_K } from "./config.js";
import type { RecommendRequest, Weights } from "./types.js";

/** Slider granularity: weights live on a 0..1 grid with this spacing. */
export const WEIGHT_STEP = 0.05;

export const PRESET_DEFAULT: Weights = { lambda_n: 0.7, lambda_p: 0.2, lambda_m: 0.1 };
export const PRESET_MATCH_ONLY: Weights = { lambda_n: 0.0, lambda_p: 0.0, lambda_m: 1.0 };

/** Snap a raw slider value onto the weight grid, clamped to [0, 1].
 *  The final rounding keeps grid points exact (0.7, not 0.7000000000000001). */
export function snapWeight(value: number): number {
  if (!Number.isFinite(value)) {
    return 0;
  }
  const clamped = Math.min(1, Math.max(0, value));
  return Number((Math.round(clamped / WEIGHT_STEP) * WEIGHT_STEP).toFixed(2));
}

/** Serialize weights into a query string, the only state this UI keeps
 *  outside the DOM. */
export function encodeWeights(weights: Weights): string {
  const params = new URLSearchParams();
  params.set("ln", String(weights.lambda_n));
  params.set("lp", String(weights.lambda_p));
  params.set("lm", String(weights.lambda_m));
  return params.toString();
}

/** Read weights back from a query string.  Missing or malformed fields
 *  fall back to the default preset, and every value is re-snapped so a
 *  hand-edited URL cannot put the sliders off-grid. */
export function decodeWeights(query: string): Weights {
  const params = new URLSearchParams(query);
  const read = (key: string, fallback: number): number => {
    const raw = params.get(key);
    if (raw === null || raw === "") {
      return fallback;
    }
    const parsed = Number(raw);
    return Number.isFinite(parsed) ? snapWeight(parsed) : fallback;
  };
  return {
    lambda_n: read("ln", PRESET_DEFAULT.lambda_n),
    lambda_p: read("lp", PRESET_DEFAULT.lambda_p),
    lambda_m: read("lm", PRESET_DEFAULT.lambda_m),
  };
}

/** Assemble the request body for the current editor and slider state. */
export function buildRecommendRequest(
  context: string,
  weights: Weights,
  k: number = DEFAULT_K,
): RecommendRequest {
  return { context, k, weights: { ...weights } };
}
