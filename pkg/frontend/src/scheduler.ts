/** Debounced single-flight request runner.
 *
 *  Every call to `request` restarts the quiet period; when it elapses
 *  the newest input is run.  At most one run is ever active: input that
 *  comes due while a run is active waits for it to settle and is then
 *  run with the latest value.  Intermediate inputs are dropped, so a
 *  burst of slider changes costs one request.
 *
 *  The runner is expected to handle its own failures (the UI shows a
 *  banner); anything it still throws is logged and swallowed so the
 *  scheduler never wedges.
 */
export class RequestScheduler<T> {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private pending: T | null = null;
  private due: T | null = null;
  private inFlight = false;

  constructor(
    private readonly delayMs: number,
    private readonly run: (input: T) => Promise<void>,
  ) {}

  request(input: T): void {
    this.pending = input;
    if (this.timer !== null) {
      clearTimeout(this.timer);
    }
    this.timer = setTimeout(() => {
      this.timer = null;
      this.due = this.pending;
      this.pending = null;
      void this.launch();
    }, this.delayMs);
  }

  /** True while a run is active; exposed for the UI's busy indicator. */
  get busy(): boolean {
    return this.inFlight;
  }

  private async launch(): Promise<void> {
    if (this.inFlight || this.due === null) {
      return;
    }
    const input = this.due;
    this.due = null;
    this.inFlight = true;
    try {
      await this.run(input);
    } catch (err) {
      console.error("scheduled request failed", err);
    } finally {
      this.inFlight = false;
      void this.launch();
    }
  }
}
