/** Grayscale image input: binary PGM/PPM decoding, resize, flip. */

import { readFileSync } from 'node:fs'

import { ImageFormatError } from './errors.js'

export interface GrayImage {
  data: Float32Array // row-major, values in [0, 1]
  height: number
  width: number
}

function parseNetpbm (blob: Buffer, path: string): { magic: string, values: number[], offset: number } {
  const magic = blob.subarray(0, 2).toString('latin1')
  let pos = 2
  const values: number[] = []
  while (values.length < 3 && pos < blob.length) {
    const ch = String.fromCharCode(blob[pos])
    if (ch === '#') {
      while (pos < blob.length && blob[pos] !== 0x0a) pos++
    } else if (/\s/.test(ch)) {
      pos++
    } else {
      let token = ''
      while (pos < blob.length && !/\s/.test(String.fromCharCode(blob[pos]))) {
        token += String.fromCharCode(blob[pos])
        pos++
      }
      const n = Number(token)
      if (!Number.isInteger(n)) throw new ImageFormatError(`${path}: bad header token ${JSON.stringify(token)}`)
      values.push(n)
    }
  }
  if (values.length < 3) throw new ImageFormatError(`${path}: truncated header`)
  pos++ // exactly one whitespace byte separates header and raster
  return { magic, values, offset: pos }
}

/** Read a binary PGM (P5) or PPM (P6) file as grayscale in [0, 1]. */
export function readImage (path: string): GrayImage {
  let blob: Buffer
  try {
    blob = readFileSync(path)
  } catch (err) {
    throw new ImageFormatError(`cannot read image ${path}: ${(err as Error).message}`)
  }
  const { magic, values, offset } = parseNetpbm(blob, path)
  const [width, height, maxval] = values
  if (magic !== 'P5' && magic !== 'P6') {
    throw new ImageFormatError(`${path}: unsupported format ${JSON.stringify(magic)} (need binary PGM/PPM)`)
  }
  if (maxval <= 0 || maxval > 255) throw new ImageFormatError(`${path}: unsupported maxval ${maxval}`)
  const channels = magic === 'P5' ? 1 : 3
  const need = width * height * channels
  const raster = blob.subarray(offset)
  if (raster.length < need) {
    throw new ImageFormatError(`${path}: raster has ${raster.length} bytes, expected ${need}`)
  }
  const data = new Float32Array(width * height)
  for (let i = 0; i < width * height; i++) {
    if (channels === 1) {
      data[i] = raster[i] / maxval
    } else {
      // Rec. 601 luma
      const r = raster[3 * i], g = raster[3 * i + 1], b = raster[3 * i + 2]
      data[i] = (0.299 * r + 0.587 * g + 0.114 * b) / maxval
    }
  }
  return { data, height, width }
}

export function hflipImage (img: GrayImage): GrayImage {
  const out = new Float32Array(img.data.length)
  for (let i = 0; i < img.height; i++) {
    for (let j = 0; j < img.width; j++) {
      out[i * img.width + j] = img.data[i * img.width + (img.width - 1 - j)]
    }
  }
  return { data: out, height: img.height, width: img.width }
}

function axisWeights (nIn: number, nOut: number): Array<{ lo: number, hi: number, frac: number }> {
  const out = []
  for (let j = 0; j < nOut; j++) {
    const x = nOut === 1 ? 0 : (j * (nIn - 1)) / (nOut - 1)
    const lo = Math.min(Math.floor(x), nIn - 1)
    const hi = Math.min(lo + 1, nIn - 1)
    out.push({ lo, hi, frac: x - lo })
  }
  return out
}

/** Corner-aligned bilinear resize. */
export function resizeImage (img: GrayImage, height: number, width: number): GrayImage {
  if (img.height === height && img.width === width) return img
  const rows = axisWeights(img.height, height)
  const cols = axisWeights(img.width, width)
  const out = new Float32Array(height * width)
  for (let i = 0; i < height; i++) {
    const r = rows[i]
    for (let j = 0; j < width; j++) {
      const c = cols[j]
      const p00 = img.data[r.lo * img.width + c.lo]
      const p01 = img.data[r.lo * img.width + c.hi]
      const p10 = img.data[r.hi * img.width + c.lo]
      const p11 = img.data[r.hi * img.width + c.hi]
      const top = p00 + (p01 - p00) * c.frac
      const bot = p10 + (p11 - p10) * c.frac
      out[i * width + j] = top + (bot - top) * r.frac
    }
  }
  return { data: out, height, width }
}

/** Mean over aligned blocks; requires the side to divide the image. */
export function blockMean (img: GrayImage, side: number): Float32Array {
  if (img.height % side || img.width % side) {
    throw new ImageFormatError(`image ${img.height}x${img.width} is not divisible into a ${side}x${side} grid`)
  }
  const bh = img.height / side
  const bw = img.width / side
  const out = new Float32Array(side * side)
  for (let bi = 0; bi < side; bi++) {
    for (let bj = 0; bj < side; bj++) {
      let acc = 0
      for (let i = 0; i < bh; i++) {
        for (let j = 0; j < bw; j++) {
          acc += img.data[(bi * bh + i) * img.width + (bj * bw + j)]
        }
      }
      out[bi * side + bj] = acc / (bh * bw)
    }
  }
  return out
}

export function meanSquaredError (a: GrayImage, b: GrayImage): number {
  if (a.height !== b.height || a.width !== b.width) {
    throw new ImageFormatError(`image sizes differ: ${a.height}x${a.width} vs ${b.height}x${b.width}`)
  }
  let acc = 0
  for (let i = 0; i < a.data.length; i++) {
    const d = a.data[i] - b.data[i]
    acc += d * d
  }
  return acc / a.data.length
}
