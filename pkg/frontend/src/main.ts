import { ApiError, fetchRecommendations } from "./api.js";
import { renderErrorBanner } from "./banner.js";
import { rankMovements } from "./compare.js";
import { DEBOUNCE_MS } from "./config.js";
import { renderResultsList } from "./resultsView.js";
import { RequestScheduler } from "./scheduler.js";
import {
  PRESET_DEFAULT,
  PRESET_MATCH_ONLY,
  buildRecommendRequest,
  decodeWeights,
  encodeWeights,
  snapWeight,
} from "./state.js";
import type { RecommendRequest, ResultView, Weights } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const contextInput = el<HTMLTextAreaElement>("context-input");
const recommendButton = el<HTMLButtonElement>("recommend-button");
const meaningLine = el<HTMLElement>("context-meaning");
const statusLine = el<HTMLElement>("status-line");
const resultsPane = el<HTMLElement>("results");
const bannerSlot = el<HTMLElement>("banner-slot");
const pinButton = el<HTMLButtonElement>("pin-button");
const unpinButton = el<HTMLButtonElement>("unpin-button");

const sliders: Record<keyof Weights, HTMLInputElement> = {
  lambda_n: el<HTMLInputElement>("slider-n"),
  lambda_p: el<HTMLInputElement>("slider-p"),
  lambda_m: el<HTMLInputElement>("slider-m"),
};
const readouts: Record<keyof Weights, HTMLElement> = {
  lambda_n: el<HTMLElement>("value-n"),
  lambda_p: el<HTMLElement>("value-p"),
  lambda_m: el<HTMLElement>("value-m"),
};
const WEIGHT_KEYS = Object.keys(sliders) as (keyof Weights)[];

// The weight sliders are the only state this page keeps in the URL;
// everything else lives in memory and dies with the tab.
let weights: Weights = decodeWeights(window.location.search);
let lastResults: ResultView[] | null = null;
let lastWeights: Weights = weights;
let lastMeaning: string | null = null;
let lastTotalMs: number | null = null;
let pinnedResults: ResultView[] | null = null;

function syncSliders(): void {
  for (const key of WEIGHT_KEYS) {
    sliders[key].value = String(weights[key]);
    readouts[key].textContent = weights[key].toFixed(2);
  }
}

function syncUrl(): void {
  history.replaceState(null, "", `${window.location.pathname}?${encodeWeights(weights)}`);
}

function renderAll(): void {
  meaningLine.textContent = lastMeaning ? `Context deep meaning: ${lastMeaning}` : "";
  statusLine.textContent = lastTotalMs === null ? "" : `served in ${lastTotalMs.toFixed(0)} ms`;
  const movements =
    pinnedResults !== null && lastResults !== null
      ? rankMovements(pinnedResults, lastResults)
      : undefined;
  resultsPane.innerHTML =
    lastResults === null ? "" : renderResultsList(lastResults, lastWeights, movements);
  pinButton.disabled = lastResults === null;
  unpinButton.disabled = pinnedResults === null;
}

function clearBanner(): void {
  bannerSlot.innerHTML = "";
}

function showBanner(message: string): void {
  bannerSlot.innerHTML = renderErrorBanner(message);
  bannerSlot.querySelector(".banner-dismiss")?.addEventListener("click", clearBanner);
  bannerSlot.querySelector(".banner-retry")?.addEventListener("click", () => {
    clearBanner();
    requestNow();
  });
}

async function send(body: RecommendRequest): Promise<void> {
  recommendButton.disabled = true;
  try {
    const response = await fetchRecommendations(body);
    lastResults = response.results;
    lastWeights = body.weights ?? weights;
    lastMeaning = response.context_deep_meaning;
    lastTotalMs = response.timings_ms.total ?? null;
    clearBanner();
    renderAll();
  } catch (err) {
    showBanner(err instanceof ApiError ? err.message : "The recommendation service is unreachable.");
  } finally {
    recommendButton.disabled = false;
  }
}

const scheduler = new RequestScheduler<RecommendRequest>(DEBOUNCE_MS, send);

function requestNow(): void {
  const context = contextInput.value.trim();
  if (!context) {
    return;
  }
  scheduler.request(buildRecommendRequest(context, weights));
}

function setWeights(next: Weights): void {
  weights = next;
  syncSliders();
  syncUrl();
  requestNow();
}

for (const key of WEIGHT_KEYS) {
  sliders[key].addEventListener("input", () => {
    setWeights({ ...weights, [key]: snapWeight(Number(sliders[key].value)) });
  });
}

el<HTMLButtonElement>("preset-default").addEventListener("click", () => {
  setWeights({ ...PRESET_DEFAULT });
});
el<HTMLButtonElement>("preset-match-only").addEventListener("click", () => {
  setWeights({ ...PRESET_MATCH_ONLY });
});

recommendButton.addEventListener("click", requestNow);
contextInput.addEventListener("keydown", (event) => {
  if (event.key === "Enter" && (event.ctrlKey || event.metaKey)) {
    requestNow();
  }
});

pinButton.addEventListener("click", () => {
  if (lastResults !== null) {
    pinnedResults = lastResults;
    renderAll();
  }
});
unpinButton.addEventListener("click", () => {
  pinnedResults = null;
  renderAll();
});

syncSliders();
syncUrl();
renderAll();
