/**
 * Waveform preview and drag selection.
 *
 * Peak extraction and the pixel->seconds selection math are pure
 * functions so they stay testable outside the browser; only `drawWaveform`
 * touches a canvas.  Selections are expressed in seconds: frame math is
 * the server's job (single source of truth for the hop size).
 */

import type { Segment } from './api.js'

/** Min/max peak pairs for one bucket per output pixel column. */
export function computePeaks(samples: Float32Array, buckets: number): Float32Array {
  const peaks = new Float32Array(buckets * 2)
  if (samples.length === 0 || buckets === 0) return peaks
  const per = samples.length / buckets
  for (let b = 0; b < buckets; b++) {
    const start = Math.floor(b * per)
    const end = Math.min(samples.length, Math.max(start + 1, Math.floor((b + 1) * per)))
    let lo = samples[start]
    let hi = samples[start]
    for (let i = start + 1; i < end; i++) {
      if (samples[i] < lo) lo = samples[i]
      if (samples[i] > hi) hi = samples[i]
    }
    peaks[b * 2] = lo
    peaks[b * 2 + 1] = hi
  }
  return peaks
}

/**
 * Convert a horizontal drag (pixels) into a clamped time selection.
 * Returns null for degenerate drags (< 1px wide or outside the canvas).
 */
export function selectionFromDrag(
  x0: number,
  x1: number,
  width: number,
  duration_s: number,
): Segment | null {
  if (width <= 0 || duration_s <= 0) return null
  let lo = Math.min(x0, x1)
  let hi = Math.max(x0, x1)
  lo = Math.max(0, Math.min(lo, width))
  hi = Math.max(0, Math.min(hi, width))
  if (hi - lo < 1) return null
  const start_s = (lo / width) * duration_s
  const end_s = (hi / width) * duration_s
  if (end_s <= start_s) return null
  return { start_s, end_s }
}

/** True when the selection spans (effectively) the whole clip. */
export function isFullRange(segment: Segment, duration_s: number, eps = 1e-3): boolean {
  return segment.start_s <= eps && segment.end_s >= duration_s - eps
}

export function drawWaveform(
  canvas: HTMLCanvasElement,
  samples: Float32Array,
  selection: Segment | null,
  duration_s: number,
): void {
  const ctx = canvas.getContext('2d')
  if (!ctx) return
  const { width, height } = canvas
  ctx.clearRect(0, 0, width, height)

  if (selection && duration_s > 0) {
    const x0 = (selection.start_s / duration_s) * width
    const x1 = (selection.end_s / duration_s) * width
    ctx.fillStyle = 'rgba(255, 165, 0, 0.3)'
    ctx.fillRect(x0, 0, x1 - x0, height)
  }

  const peaks = computePeaks(samples, width)
  const mid = height / 2
  ctx.strokeStyle = '#2a6f97'
  ctx.beginPath()
  for (let x = 0; x < width; x++) {
    const lo = peaks[x * 2]
    const hi = peaks[x * 2 + 1]
    ctx.moveTo(x + 0.5, mid - hi * mid)
    ctx.lineTo(x + 0.5, mid - lo * mid)
  }
  ctx.stroke()
}

/** Decode an audio blob into mono samples + duration for previewing. */
export async function decodeForPreview(
  blob: Blob,
): Promise<{ samples: Float32Array; duration_s: number }> {
  const ctx = new AudioContext()
  try {
    const buf = await ctx.decodeAudioData(await blob.arrayBuffer())
    return { samples: buf.getChannelData(0), duration_s: buf.duration }
  } finally {
    void ctx.close()
  }
}
