/** Debounced latest-wins scheduler for restore requests.
 *
 * At most one request is in flight; while it runs, newer levels overwrite
 * the pending slot. Stale responses are discarded by sequence number, so the
 * displayed image always corresponds to the most recently requested level.
 */

export type Fetcher = (level: number) => Promise<Blob>;
export type Apply = (level: number, image: Blob) => void;
export type OnError = (err: unknown) => void;

export class RestoreQueue {
  private debounceMs: number;
  private fetcher: Fetcher;
  private apply: Apply;
  private onError: OnError;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private seq = 0;
  private applied = 0;
  private inFlight = false;
  private pending: number | null = null;

  constructor(fetcher: Fetcher, apply: Apply, debounceMs = 120, onError: OnError = () => {}) {
    this.fetcher = fetcher;
    this.apply = apply;
    this.debounceMs = debounceMs;
    this.onError = onError;
  }

  /** Called on every slider move. */
  request(level: number): void {
    this.pending = level;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.flush();
    }, this.debounceMs);
  }

  private flush(): void {
    if (this.inFlight || this.pending === null) return;
    const level = this.pending;
    this.pending = null;
    const ticket = ++this.seq;
    this.inFlight = true;
    this.fetcher(level)
      .then((blob) => {
        if (ticket > this.applied) {
          this.applied = ticket;
          this.apply(level, blob);
        }
      })
      .catch((err) => this.onError(err))
      .finally(() => {
        this.inFlight = false;
        if (this.pending !== null) this.flush();
      });
  }
}
