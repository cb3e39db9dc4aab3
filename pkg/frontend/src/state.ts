// Client-side session state: sequence ordering, rolling fps, staleness.

export type ConnectionStatus = 'connecting' | 'live' | 'stale' | 'closed' | 'error';

export const STALE_AFTER_MS = 2000;
export const FPS_WINDOW_MS = 2000;

export class ViewerState {
  status: ConnectionStatus = 'connecting';
  lastSeq = 0;
  inputMode: 'orbit' | 'fly' = 'orbit';
  overlayTiles = false;
  overlayDensity = false;
  private arrivals: number[] = [];
  private lastFrameAt = -Infinity;

  /** Returns true when the frame should be displayed; out-of-order frames
   *  (impossible over one socket, checked anyway) are dropped. */
  acceptFrame(seq: number, nowMs: number): boolean {
    if (seq <= this.lastSeq) return false;
    this.lastSeq = seq;
    this.lastFrameAt = nowMs;
    this.arrivals.push(nowMs);
    const cutoff = nowMs - FPS_WINDOW_MS;
    while (this.arrivals.length && this.arrivals[0] < cutoff) this.arrivals.shift();
    this.status = 'live';
    return true;
  }

  fps(nowMs: number): number {
    const cutoff = nowMs - FPS_WINDOW_MS;
    const inWindow = this.arrivals.filter((t) => t >= cutoff).length;
    return inWindow / (FPS_WINDOW_MS / 1000);
  }

  checkStale(nowMs: number): boolean {
    if (this.status === 'live' && nowMs - this.lastFrameAt > STALE_AFTER_MS) {
      this.status = 'stale';
    }
    return this.status === 'stale';
  }
}

/** Reconnect backoff: 1 s, 2 s, 4 s, then stays at 4 s. */
export function retryDelayMs(attempt: number): number {
  const schedule = [1000, 2000, 4000];
  return schedule[Math.min(attempt, schedule.length - 1)];
}
