// Camera input capture: pointer drags become yaw/pitch deltas, WASD becomes
// camera-frame translation. Deltas accumulate and flush as coalesced events
// at most 60 Hz (well under the service's 250 events/s limit); idle input
// emits nothing.

import { InputEvent } from './protocol.js';

export const RADIANS_PER_PIXEL = 0.005;
export const MOVE_UNITS_PER_SECOND = 2.0;
export const FLUSH_HZ = 60;

export class InputAccumulator {
  private yaw = 0;
  private pitch = 0;
  private held = new Set<string>();

  pointerDelta(dxPx: number, dyPx: number): void {
    this.yaw += dxPx * RADIANS_PER_PIXEL;
    this.pitch += -dyPx * RADIANS_PER_PIXEL;
  }

  keyDown(code: string): void {
    if (code === 'KeyW' || code === 'KeyA' || code === 'KeyS' || code === 'KeyD') {
      this.held.add(code);
    }
  }

  keyUp(code: string): void {
    this.held.delete(code);
  }

  /** Build the coalesced event for one flush interval, or null when idle. */
  flush(dtSeconds: number, nowMs: number): InputEvent | null {
    const move: [number, number, number] = [0, 0, 0];
    const step = MOVE_UNITS_PER_SECOND * dtSeconds;
    if (this.held.has('KeyW')) move[2] += step;
    if (this.held.has('KeyS')) move[2] -= step;
    if (this.held.has('KeyD')) move[0] += step;
    if (this.held.has('KeyA')) move[0] -= step;
    const idle = this.yaw === 0 && this.pitch === 0 &&
      move[0] === 0 && move[1] === 0 && move[2] === 0;
    if (idle) return null;
    const ev: InputEvent = {
      type: 'input', yaw: this.yaw, pitch: this.pitch, move, ts: nowMs,
    };
    this.yaw = 0;
    this.pitch = 0;
    return ev;
  }
}

/** Wire DOM listeners to an accumulator; returns a disposer. */
export function bindInput(
  canvas: HTMLCanvasElement,
  acc: InputAccumulator,
  send: (ev: InputEvent) => void,
): () => void {
  let dragging = false;
  const onDown = (e: PointerEvent) => {
    dragging = true;
    canvas.setPointerCapture(e.pointerId);
  };
  const onUp = (e: PointerEvent) => {
    dragging = false;
    canvas.releasePointerCapture(e.pointerId);
  };
  const onMove = (e: PointerEvent) => {
    if (dragging) acc.pointerDelta(e.movementX, e.movementY);
  };
  const onKeyDown = (e: KeyboardEvent) => acc.keyDown(e.code);
  const onKeyUp = (e: KeyboardEvent) => acc.keyUp(e.code);
  canvas.addEventListener('pointerdown', onDown);
  canvas.addEventListener('pointerup', onUp);
  canvas.addEventListener('pointermove', onMove);
  window.addEventListener('keydown', onKeyDown);
  window.addEventListener('keyup', onKeyUp);
  let last = performance.now();
  const timer = window.setInterval(() => {
    const now = performance.now();
    const ev = acc.flush((now - last) / 1000, now);
    last = now;
    if (ev) send(ev);
  }, 1000 / FLUSH_HZ);
  return () => {
    window.clearInterval(timer);
    canvas.removeEventListener('pointerdown', onDown);
    canvas.removeEventListener('pointerup', onUp);
    canvas.removeEventListener('pointermove', onMove);
    window.removeEventListener('keydown', onKeyDown);
    window.removeEventListener('keyup', onKeyUp);
  };
}
