import { mkdtempSync, writeFileSync } from 'node:fs'
import { tmpdir } from 'node:os'
import { join } from 'node:path'

import type { GrayImage } from '../src/image.js'

/** Gradient floor with a bright disk and a mid-gray rectangle. */
export function makeScene (side: number): GrayImage {
  const data = new Float32Array(side * side)
  for (let i = 0; i < side; i++) {
    for (let j = 0; j < side; j++) {
      let v = (40 + 30 * (i / side)) / 255
      const dr = i - 0.31 * side
      const dc = j - 0.34 * side
      if (dr * dr + dc * dc <= (0.19 * side) ** 2) v = 215 / 255
      if (i >= 0.61 * side && i < 0.88 * side && j >= 0.55 * side && j < 0.92 * side) v = 130 / 255
      data[i * side + j] = v
    }
  }
  return { data, height: side, width: side }
}

export function writePgm (img: GrayImage, path: string): void {
  const px = Buffer.alloc(img.height * img.width)
  for (let i = 0; i < px.length; i++) {
    px[i] = Math.max(0, Math.min(255, Math.round(img.data[i] * 255)))
  }
  const header = Buffer.from(`P5\n${img.width} ${img.height}\n255\n`)
  writeFileSync(path, Buffer.concat([header, px]))
}

export function tempDir (prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix))
}
