// Diagnostics overlay: HUD text plus optional tile-rectangle outlines.
// The raster itself is blitted untouched; overlays draw on a separate layer.

import { ServerStats } from './protocol.js';

export interface TileRect {
  rect: [number, number, number, number]; // x0, y0, x1, y1 in image pixels
}

export interface HudModel {
  samplesPerSecond: string;
  tileCount: string;
  overheadFraction: string;
  clientFps: string;
  status: string;
}

const DASH = '—';

export function hudModel(stats: ServerStats | null, clientFps: number | null,
                         status: string): HudModel {
  return {
    samplesPerSecond: stats ? Math.round(stats.samplesPerSecond).toString() : DASH,
    tileCount: stats ? stats.tileCount.toString() : DASH,
    overheadFraction: stats ? (stats.overheadFraction * 100).toFixed(1) + '%' : DASH,
    clientFps: clientFps === null ? DASH : clientFps.toFixed(1),
    status,
  };
}

/** Tile rects scaled from image space to canvas space. */
export function scaledTileRects(
  tiles: TileRect[], imageW: number, imageH: number,
  canvasW: number, canvasH: number,
): Array<[number, number, number, number]> {
  const sx = canvasW / imageW;
  const sy = canvasH / imageH;
  return tiles.map(({ rect: [x0, y0, x1, y1] }) =>
    [x0 * sx, y0 * sy, (x1 - x0) * sx, (y1 - y0) * sy]);
}

export function drawOverlay(
  ctx: CanvasRenderingContext2D, hud: HudModel,
  tiles: Array<[number, number, number, number]> | null,
): void {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  if (tiles) {
    ctx.strokeStyle = 'rgba(80, 255, 120, 0.55)';
    ctx.lineWidth = 1;
    for (const [x, y, w, h] of tiles) ctx.strokeRect(x + 0.5, y + 0.5, w - 1, h - 1);
  }
  ctx.fillStyle = 'rgba(0, 0, 0, 0.55)';
  ctx.fillRect(4, 4, 210, 76);
  ctx.fillStyle = '#d7ffd7';
  ctx.font = '12px monospace';
  const lines = [
    `status   ${hud.status}`,
    `fps      ${hud.clientFps}`,
    `samples  ${hud.samplesPerSecond}/s`,
    `tiles    ${hud.tileCount}  ovh ${hud.overheadFraction}`,
  ];
  lines.forEach((s, i) => ctx.fillText(s, 10, 20 + i * 16));
}
