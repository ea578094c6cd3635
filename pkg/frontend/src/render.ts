// Canvas rendering of the view model, plus the pure world<->screen camera
// math (kept side-effect free so it is testable without a DOM).

import type { MapSnapshot } from "./types";
import type { ViewModel } from "./viewmodel";

export interface Camera {
  /** Pixels per world meter. */
  scale: number;
  /** Screen position of the world origin, in canvas pixels. */
  offsetX: number;
  offsetY: number;
}

/** World y grows upward; canvas y grows downward. */
export function worldToScreen(cam: Camera, x: number, y: number): [number, number] {
  return [cam.offsetX + x * cam.scale, cam.offsetY - y * cam.scale];
}

export function screenToWorld(cam: Camera, px: number, py: number): [number, number] {
  return [(px - cam.offsetX) / cam.scale, (cam.offsetY - py) / cam.scale];
}

/** Zoom about a fixed screen point so the world under the cursor stays put. */
export function zoomAt(cam: Camera, px: number, py: number, factor: number): Camera {
  const scale = Math.min(2000, Math.max(5, cam.scale * factor));
  const ratio = scale / cam.scale;
  return {
    scale,
    offsetX: px - (px - cam.offsetX) * ratio,
    offsetY: py - (py - cam.offsetY) * ratio,
  };
}

export function panBy(cam: Camera, dx: number, dy: number): Camera {
  return { ...cam, offsetX: cam.offsetX + dx, offsetY: cam.offsetY + dy };
}

export function fitCamera(map: MapSnapshot, width: number, height: number): Camera {
  const worldW = map.width * map.resolution;
  const worldH = map.height * map.resolution;
  const scale = 0.92 * Math.min(width / worldW, height / worldH);
  return {
    scale,
    offsetX: (width - worldW * scale) / 2 - map.origin[0] * scale,
    offsetY: height - (height - worldH * scale) / 2 + map.origin[1] * scale,
  };
}

/** Expand the run-length raster to one byte per cell (row-major, row 0 first). */
export function decodeRle(map: MapSnapshot): Uint8Array {
  const out = new Uint8Array(map.width * map.height);
  let at = 0;
  for (const [value, count] of map.cells_rle) {
    out.fill(value, at, at + count);
    at += count;
  }
  if (at !== out.length) throw new Error(`raster is ${at} cells, expected ${out.length}`);
  return out;
}

function cellColor(value: number, map: MapSnapshot): [number, number, number] {
  if (value >= map.occupied_threshold) return [52, 58, 70];
  if (value === map.unknown_value) return [196, 196, 188];
  return [244, 246, 248];
}

let rasterCache: { source: MapSnapshot; canvas: OffscreenCanvas } | null = null;

function mapRaster(map: MapSnapshot): OffscreenCanvas {
  if (rasterCache && rasterCache.source === map) return rasterCache.canvas;
  const cells = decodeRle(map);
  const canvas = new OffscreenCanvas(map.width, map.height);
  const ctx = canvas.getContext("2d")!;
  const image = ctx.createImageData(map.width, map.height);
  for (let row = 0; row < map.height; row++) {
    for (let col = 0; col < map.width; col++) {
      // image row 0 is the top; cell row 0 is the bottom
      const [r, g, b] = cellColor(cells[row * map.width + col], map);
      const at = ((map.height - 1 - row) * map.width + col) * 4;
      image.data[at] = r;
      image.data[at + 1] = g;
      image.data[at + 2] = b;
      image.data[at + 3] = 255;
    }
  }
  ctx.putImageData(image, 0, 0);
  rasterCache = { source: map, canvas };
  return canvas;
}

function drawArrow(ctx: CanvasRenderingContext2D, from: [number, number], to: [number, number]) {
  const angle = Math.atan2(to[1] - from[1], to[0] - from[0]);
  const size = 7;
  ctx.beginPath();
  ctx.moveTo(to[0], to[1]);
  ctx.lineTo(to[0] - size * Math.cos(angle - 0.45), to[1] - size * Math.sin(angle - 0.45));
  ctx.lineTo(to[0] - size * Math.cos(angle + 0.45), to[1] - size * Math.sin(angle + 0.45));
  ctx.closePath();
  ctx.fill();
}

export function drawScene(ctx: CanvasRenderingContext2D, vm: ViewModel, cam: Camera) {
  const { width, height } = ctx.canvas;
  ctx.fillStyle = "#dde3e8";
  ctx.fillRect(0, 0, width, height);

  if (vm.map) {
    const raster = mapRaster(vm.map);
    const [ox, oy] = worldToScreen(cam, vm.map.origin[0],
      vm.map.origin[1] + vm.map.height * vm.map.resolution);
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(raster, ox, oy,
      vm.map.width * vm.map.resolution * cam.scale,
      vm.map.height * vm.map.resolution * cam.scale);
  }

  if (vm.tour) {
    ctx.strokeStyle = "#c0392b";
    ctx.fillStyle = "#c0392b";
    ctx.lineWidth = 1.6;
    for (const path of vm.tour.segment_paths) {
      if (path.length < 2) continue;
      ctx.beginPath();
      const pts = path.map(([x, y]) => worldToScreen(cam, x, y));
      ctx.moveTo(pts[0][0], pts[0][1]);
      for (const [px, py] of pts.slice(1)) ctx.lineTo(px, py);
      ctx.stroke();
      const mid = Math.floor(pts.length / 2);
      if (mid > 0) drawArrow(ctx, pts[mid - 1], pts[mid]);
    }
    const start = vm.tour.nodes.find((n) => n.id === 0);
    if (start) {
      const [px, py] = worldToScreen(cam, start.x, start.y);
      ctx.fillStyle = "#2465c2";
      ctx.beginPath();
      ctx.arc(px, py, 6, 0, Math.PI * 2);
      ctx.fill();
    }
  }

  ctx.font = "11px sans-serif";
  for (const obj of vm.objects) {
    const [px, py] = worldToScreen(cam, obj.position[0], obj.position[1]);
    const hit = vm.highlight && vm.highlight.index === obj.index;
    if (hit) {
      ctx.strokeStyle = "#e67e22";
      ctx.lineWidth = 2.5;
      ctx.beginPath();
      ctx.arc(px, py, 9, 0, Math.PI * 2);
      ctx.stroke();
    }
    ctx.fillStyle = hit ? "#e67e22" : "#1d8348";
    ctx.beginPath();
    ctx.arc(px, py, 3.5, 0, Math.PI * 2);
    ctx.fill();
    const label = hit ? `${obj.label} (${vm.highlight!.score.toFixed(3)})` : obj.label;
    ctx.fillText(label, px + 6, py - 5);
  }

  const [rx, ry] = worldToScreen(cam, vm.pose[0], vm.pose[1]);
  const theta = vm.pose[2];
  ctx.fillStyle = "#8e44ad";
  ctx.beginPath();
  // screen angles are mirrored because canvas y points down
  ctx.moveTo(rx + 10 * Math.cos(-theta), ry + 10 * Math.sin(-theta));
  ctx.lineTo(rx + 6 * Math.cos(-theta + 2.5), ry + 6 * Math.sin(-theta + 2.5));
  ctx.lineTo(rx + 6 * Math.cos(-theta - 2.5), ry + 6 * Math.sin(-theta - 2.5));
  ctx.closePath();
  ctx.fill();
}
