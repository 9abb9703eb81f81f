import { API_BASE } from "./config.js";
import type { QuotationView, RecommendRequest, RecommendResponse } from "./types.js";

/** Error raised for any non-2xx API reply, carrying the HTTP status and
 *  the server's message when one was provided. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function raiseFor(res: Response): Promise<never> {
  let message = `request failed with status ${res.status}`;
  try {
    const body = await res.json();
    if (body && typeof body.error === "string") {
      message = body.error;
    }
  } catch {
    // non-JSON error body; keep the generic message
  }
  throw new ApiError(res.status, message);
}

export async function fetchRecommendations(
  body: RecommendRequest,
  signal?: AbortSignal,
): Promise<RecommendResponse> {
  const res = await fetch(`${API_BASE}/v1/recommend`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
    signal,
  });
  if (!res.ok) {
    await raiseFor(res);
  }
  return (await res.json()) as RecommendResponse;
}

export async function fetchQuote(id: string): Promise<QuotationView> {
  const res = await fetch(`${API_BASE}/v1/quote/${encodeURIComponent(id)}`);
  if (!res.ok) {
    await raiseFor(res);
  }
  return (await res.json()) as QuotationView;
}
