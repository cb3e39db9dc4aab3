import { describe, expect, it } from 'vitest';
import { hudModel, scaledTileRects } from '../src/overlay.js';

describe('hudModel', () => {
  it('fills all fields when stats are present', () => {
    const hud = hudModel(
      { seq: 1, samplesPerSecond: 24311.7, tileCount: 64, overheadFraction: 0.063 },
      29.7, 'live');
    expect(hud.samplesPerSecond).toBe('24312');
    expect(hud.tileCount).toBe('64');
    expect(hud.overheadFraction).toBe('6.3%');
    expect(hud.clientFps).toBe('29.7');
  });

  it('shows dashes when stats are absent', () => {
    const hud = hudModel(null, null, 'connecting');
    expect(hud.samplesPerSecond).toBe('—');
    expect(hud.tileCount).toBe('—');
    expect(hud.overheadFraction).toBe('—');
    expect(hud.clientFps).toBe('—');
  });
});

describe('scaledTileRects', () => {
  it('keeps one rectangle per tile', () => {
    const tiles = Array.from({ length: 64 }, (_, i) => ({
      rect: [(i % 8) * 8, Math.floor(i / 8) * 8,
             (i % 8) * 8 + 8, Math.floor(i / 8) * 8 + 8] as [number, number, number, number],
    }));
    const rects = scaledTileRects(tiles, 64, 64, 512, 512);
    expect(rects.length).toBe(64);
    expect(rects[0]).toEqual([0, 0, 64, 64]);   // 8 px tile at 8x scale
    expect(rects[63]).toEqual([448, 448, 64, 64]);
  });

  it('scales non-square canvases per axis', () => {
    const rects = scaledTileRects([{ rect: [0, 0, 32, 16] }], 64, 32, 128, 128);
    expect(rects[0]).toEqual([0, 0, 64, 64]);
  });
});
