import { afterEach, expect, test, vi } from "vitest";

import { ApiError, fetchQuote, fetchRecommendations } from "../src/api";
import type { RecommendRequest, RecommendResponse } from "../src/types";
import defaultFixture from "./fixtures/recommend_default.json";

interface Fixture {
  request: RecommendRequest | null;
  response: RecommendResponse;
}

const fixture = defaultFixture as unknown as Fixture;

afterEach(() => {
  vi.unstubAllGlobals();
});

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

test("fetchRecommendations posts the body and returns the typed reply", async () => {
  const fetchMock = vi.fn(async () => jsonResponse(200, fixture.response));
  vi.stubGlobal("fetch", fetchMock);

  const reply = await fetchRecommendations(fixture.request!);
  expect(reply.results.map((r) => r.quotation.id)).toEqual(
    fixture.response.results.map((r) => r.quotation.id),
  );
  expect(reply.context_deep_meaning).toBe(fixture.response.context_deep_meaning);

  expect(fetchMock).toHaveBeenCalledTimes(1);
  const [url, init] = fetchMock.mock.calls[0] as unknown as [string, RequestInit];
  expect(url).toBe("/v1/recommend");
  expect(init.method).toBe("POST");
  expect(JSON.parse(init.body as string)).toEqual(fixture.request);
});

test("a JSON error body surfaces the server's message", async () => {
  vi.stubGlobal(
    "fetch",
    vi.fn(async () => jsonResponse(400, { error: "context must be a non-empty string" })),
  );
  const failure = fetchRecommendations({ context: "   " });
  await expect(failure).rejects.toBeInstanceOf(ApiError);
  await expect(failure).rejects.toMatchObject({
    status: 400,
    message: "context must be a non-empty string",
  });
});

test("a non-JSON error body falls back to a status message", async () => {
  vi.stubGlobal(
    "fetch",
    vi.fn(async () => new Response("gateway timeout", { status: 503 })),
  );
  await expect(fetchRecommendations({ context: "hello" })).rejects.toMatchObject({
    status: 503,
    message: "request failed with status 503",
  });
});

test("fetchQuote escapes the id into the path", async () => {
  const quote = fixture.response.results[0].quotation;
  const fetchMock = vi.fn(async () => jsonResponse(200, quote));
  vi.stubGlobal("fetch", fetchMock);

  const reply = await fetchQuote("a/b c");
  expect(reply.id).toBe(quote.id);
  const [url] = fetchMock.mock.calls[0] as unknown as [string];
  expect(url).toBe("/v1/quote/a%2Fb%20c");
});
