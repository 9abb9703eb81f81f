/** Service location and UI tuning constants. */

/** Empty base means same origin; the service mounts this UI under /ui/. */
export const API_BASE = "";

/** How many results to request per recommendation. */
export const DEFAULT_K = 5;

/** Quiet period between a slider change and the request it triggers. */
export const DEBOUNCE_MS = 300;

/** Every score shown to the user is rounded to this many decimals. */
export const SCORE_DECIMALS = 3;
