/** Reconnect backoff (0.5 s doubling to an 8 s cap) and a stall watchdog. */

export const STALL_AFTER_MS = 2000;

export class Backoff {
  private attempt = 0;

  constructor(
    private readonly baseMs = 500,
    private readonly capMs = 8000,
  ) {}

  /** Delay before the next reconnect attempt: 0.5, 1, 2, 4, 8, 8, ... */
  next(): number {
    const delay = Math.min(this.baseMs * 2 ** this.attempt, this.capMs);
    this.attempt += 1;
    return delay;
  }

  reset(): void {
    this.attempt = 0;
  }
}

/** True when no telemetry has arrived for STALL_AFTER_MS. */
export function isStalled(lastMessageAtMs: number | null, nowMs: number): boolean {
  return lastMessageAtMs !== null && nowMs - lastMessageAtMs > STALL_AFTER_MS;
}
