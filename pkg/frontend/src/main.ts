// Entry point: wires the canvases to a live session. Query parameters:
//   ?host=localhost:8765   service address (default: current host)
//   ?overlay=tiles         draw the sampler tiling over the raster

import { LiveSession } from './client.js';

function main(): void {
  const params = new URLSearchParams(window.location.search);
  const host = params.get('host') ?? window.location.host;
  const overlay = params.get('overlay') === 'tiles';

  const canvas = document.getElementById('raster') as HTMLCanvasElement;
  const hud = document.getElementById('hud') as HTMLCanvasElement;
  const banner = document.getElementById('banner') as HTMLDivElement;

  const session = new LiveSession({
    url: `ws://${host}/stream`,
    tilesUrl: `http://${host}/tiles`,
    canvas,
    overlayCanvas: hud,
    showTiles: overlay,
    onError: (msg) => {
      banner.textContent = msg;
      banner.style.display = 'block';
    },
  });
  session.start();
  window.addEventListener('beforeunload', () => session.stop());
}

main();
