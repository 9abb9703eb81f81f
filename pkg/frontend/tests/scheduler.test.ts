import { afterEach, expect, test, vi } from "vitest";

import { RequestScheduler } from "../src/scheduler";

afterEach(() => {
  vi.useRealTimers();
});

test("a burst of requests fires one run with the newest input", async () => {
  vi.useFakeTimers();
  const runs: number[] = [];
  const scheduler = new RequestScheduler<number>(300, async (n) => {
    runs.push(n);
  });
  scheduler.request(1);
  scheduler.request(2);
  scheduler.request(3);
  await vi.advanceTimersByTimeAsync(299);
  expect(runs).toEqual([]);
  await vi.advanceTimersByTimeAsync(1);
  expect(runs).toEqual([3]);
});

test("each new request restarts the quiet period", async () => {
  vi.useFakeTimers();
  const runs: number[] = [];
  const scheduler = new RequestScheduler<number>(300, async (n) => {
    runs.push(n);
  });
  scheduler.request(1);
  await vi.advanceTimersByTimeAsync(200);
  scheduler.request(2);
  await vi.advanceTimersByTimeAsync(200);
  expect(runs).toEqual([]);
  await vi.advanceTimersByTimeAsync(100);
  expect(runs).toEqual([2]);
});

test("input coming due mid-flight waits for the active run to settle", async () => {
  vi.useFakeTimers();
  const events: string[] = [];
  let release!: () => void;
  const gate = new Promise<void>((resolve) => {
    release = resolve;
  });
  const scheduler = new RequestScheduler<string>(300, async (name) => {
    events.push(`start ${name}`);
    if (name === "slow") {
      await gate;
    }
    events.push(`end ${name}`);
  });

  scheduler.request("slow");
  await vi.advanceTimersByTimeAsync(300);
  expect(events).toEqual(["start slow"]);
  expect(scheduler.busy).toBe(true);

  scheduler.request("next");
  await vi.advanceTimersByTimeAsync(300);
  // "next" is due but must not start while "slow" is in flight.
  expect(events).toEqual(["start slow"]);

  release();
  await vi.advanceTimersByTimeAsync(0);
  expect(events).toEqual(["start slow", "end slow", "start next", "end next"]);
  expect(scheduler.busy).toBe(false);
});

test("a run finishing early never shortcuts the next quiet period", async () => {
  vi.useFakeTimers();
  const runs: number[] = [];
  const scheduler = new RequestScheduler<number>(300, async (n) => {
    runs.push(n);
  });
  scheduler.request(1);
  await vi.advanceTimersByTimeAsync(300);
  expect(runs).toEqual([1]);
  scheduler.request(2);
  await vi.advanceTimersByTimeAsync(299);
  expect(runs).toEqual([1]);
  await vi.advanceTimersByTimeAsync(1);
  expect(runs).toEqual([1, 2]);
});

test("a throwing run is contained and the scheduler keeps working", async () => {
  vi.useFakeTimers();
  const errorSpy = vi.spyOn(console, "error").mockImplementation(() => {});
  const runs: number[] = [];
  const scheduler = new RequestScheduler<number>(300, async (n) => {
    if (n === 1) {
      throw new Error("boom");
    }
    runs.push(n);
  });
  scheduler.request(1);
  await vi.advanceTimersByTimeAsync(300);
  scheduler.request(2);
  await vi.advanceTimersByTimeAsync(300);
  expect(runs).toEqual([2]);
  expect(errorSpy).toHaveBeenCalled();
  errorSpy.mockRestore();
});
