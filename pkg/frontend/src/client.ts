// Live session: socket lifecycle, frame blit, reconnect with backoff.

import { InputAccumulator, bindInput } from './input.js';
import { FramePacket, ServerStats, decodeFramePacket, encodeInput,
         parseStats, rgbToRgba } from './protocol.js';
import { ViewerState, retryDelayMs } from './state.js';
import { TileRect, drawOverlay, hudModel, scaledTileRects } from './overlay.js';

export interface SessionOptions {
  url: string;                 // ws://host:port/stream
  tilesUrl?: string;           // http endpoint returning {tiles: [...]}
  canvas: HTMLCanvasElement;   // raster target
  overlayCanvas: HTMLCanvasElement;
  showTiles: boolean;
  onError?: (msg: string) => void;
}

export class LiveSession {
  readonly state = new ViewerState();
  private ws: WebSocket | null = null;
  private stats: ServerStats | null = null;
  private tiles: TileRect[] = [];
  private attempt = 0;
  private disposed = false;
  private unbind: (() => void) | null = null;
  private imageData: ImageData | null = null;
  private hudTimer = 0;

  constructor(private opts: SessionOptions) {}

  start(): void {
    this.connect();
    const acc = new InputAccumulator();
    this.unbind = bindInput(this.opts.canvas, acc, (ev) => {
      if (this.ws && this.ws.readyState === WebSocket.OPEN && this.state.status === 'live') {
        this.ws.send(encodeInput(ev));
      }
    });
    this.hudTimer = window.setInterval(() => this.renderHud(), 250);
    if (this.opts.showTiles && this.opts.tilesUrl) {
      window.setInterval(() => this.refreshTiles(), 1000);
    }
  }

  stop(): void {
    this.disposed = true;
    this.unbind?.();
    window.clearInterval(this.hudTimer);
    this.ws?.close();
  }

  private connect(): void {
    if (this.disposed) return;
    const ws = new WebSocket(this.opts.url);
    ws.binaryType = 'arraybuffer';
    this.ws = ws;
    ws.onmessage = (ev: MessageEvent) => {
      if (ev.data instanceof ArrayBuffer) {
        this.onFrame(ev.data);
      } else if (typeof ev.data === 'string') {
        const s = parseStats(ev.data);
        if (s) this.stats = s;
      }
    };
    ws.onopen = () => {
      this.attempt = 0;
    };
    ws.onclose = () => {
      if (this.disposed) return;
      this.state.status = 'closed';
      const delay = retryDelayMs(this.attempt++);
      window.setTimeout(() => this.connect(), delay);
    };
    ws.onerror = () => {
      this.state.status = 'error';
      this.opts.onError?.('stream error; retrying');
    };
  }

  private onFrame(buf: ArrayBuffer): void {
    let packet: FramePacket;
    try {
      packet = decodeFramePacket(buf);
    } catch (e) {
      this.state.status = 'error';
      this.opts.onError?.(String(e));
      this.ws?.close();
      return;
    }
    if (!this.state.acceptFrame(packet.seq, performance.now())) return;
    this.blit(packet);
  }

  private blit(packet: FramePacket): void {
    const canvas = this.opts.canvas;
    if (canvas.width !== packet.width || canvas.height !== packet.height) {
      canvas.width = packet.width;
      canvas.height = packet.height;
      this.imageData = null;
    }
    const ctx = canvas.getContext('2d');
    if (!ctx) return;
    if (!this.imageData) {
      this.imageData = ctx.createImageData(packet.width, packet.height);
    }
    rgbToRgba(packet.pixels, this.imageData.data);
    ctx.putImageData(this.imageData, 0, 0);
  }

  private async refreshTiles(): Promise<void> {
    try {
      const res = await fetch(this.opts.tilesUrl!);
      const doc = await res.json();
      this.tiles = doc.tiles ?? [];
    } catch {
      // endpoint unreachable: keep the last tiling
    }
  }

  private renderHud(): void {
    const now = performance.now();
    this.state.checkStale(now);
    const ctx = this.opts.overlayCanvas.getContext('2d');
    if (!ctx) return;
    const hud = hudModel(this.stats, this.state.lastSeq ? this.state.fps(now) : null,
                         this.state.status);
    let rects = null;
    if (this.opts.showTiles && this.tiles.length && this.opts.canvas.width) {
      rects = scaledTileRects(this.tiles, this.opts.canvas.width, this.opts.canvas.height,
                              this.opts.overlayCanvas.width, this.opts.overlayCanvas.height);
    }
    drawOverlay(ctx, hud, rects);
  }
}
