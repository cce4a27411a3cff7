// Reconnect backoff: start at 1 s, double per failure, cap at 8 s.

export class Backoff {
  private readonly initialMs: number;
  private readonly maxMs: number;
  private currentMs: number;

  constructor(initialMs = 1000, maxMs = 8000) {
    this.initialMs = initialMs;
    this.maxMs = maxMs;
    this.currentMs = initialMs;
  }

  /** Delay to wait before the next attempt; grows on every call. */
  next(): number {
    const delay = this.currentMs;
    this.currentMs = Math.min(this.currentMs * 2, this.maxMs);
    return delay;
  }

  /** Call on a successful connection to restore the initial delay. */
  reset(): void {
    this.currentMs = this.initialMs;
  }
}
