/** Deterministic stand-in for a diffusion model.
 *
 * Every output is a pure function of the latent content and the prompt
 * tokens, so exports are reproducible byte for byte and mirror cleanly
 * under horizontal flips. The attention model is content-driven: cross
 * weights peak where a grid cell's intensity matches a token's embedded
 * value, self weights combine spatial locality with intensity similarity,
 * and deeper layers widen their bandwidths slightly so per-layer tensors
 * genuinely differ.
 */

import { registerBackend, type AttentionSink, type BackendOptions, type DiffusionBackend, type Latent } from './backend.js'
import { ExporterError } from './errors.js'
import { blockMean, type GrayImage } from './image.js'
import type { Token } from './tokenizer.js'

// fixed channel mixing for the latent codec; W must not be orthogonal to
// itself so decode can invert the affine encode exactly
const MIX_W = [1.2, 0.8, -0.5, 0.4]
const MIX_B = [0.1, -0.2, 0.05, 0.0]
const MIX_NORM = MIX_W.reduce((a, w) => a + w * w, 0)

const NOISE_DRIFT = 0.02 // eps = DRIFT * z + PULL * tokenSignal
const NOISE_PULL = 0.05

function fnv1a (text: string): number {
  let hash = 0x811c9dc5
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i)
    hash = Math.imul(hash, 0x01000193) >>> 0
  }
  return hash >>> 0
}

/** Stable per-piece scalar in [0, 1]. */
export function tokenValue (piece: string): number {
  return fnv1a(piece) / 0x100000000
}

function tokenChannelSignal (tokens: Token[]): number[] {
  const signal = [0, 0, 0, 0]
  if (tokens.length === 0) return signal
  for (const token of tokens) {
    for (let c = 0; c < 4; c++) {
      signal[c] += tokenValue(`${token.piece}#ch${c}`) * 2 - 1
    }
  }
  return signal.map(s => s / tokens.length)
}

export class SyntheticBackend implements DiffusionBackend {
  readonly modelId: string
  readonly latentSide: number
  readonly attentionResolutions: number[]
  readonly layersPerResolution: number

  constructor (options: BackendOptions = {}) {
    this.latentSide = options.latentSide ?? 64
    if (this.latentSide < 8 || this.latentSide % 8 !== 0) {
      throw new ExporterError(`latent side must be a positive multiple of 8, got ${this.latentSide}`)
    }
    this.layersPerResolution = options.layersPerResolution ?? 2
    if (this.layersPerResolution < 1) {
      throw new ExporterError(`layersPerResolution must be >= 1, got ${this.layersPerResolution}`)
    }
    const drop = new Set(options.dropResolutions ?? [])
    this.attentionResolutions = [8, 4, 2, 1]
      .map(d => this.latentSide / d)
      .filter(r => Number.isInteger(r) && !drop.has(r))
    this.modelId = `synthetic-${this.latentSide}`
  }

  encodeImage (image: GrayImage): Latent {
    const side = this.latentSide
    const g = blockMean(image, side)
    const data = new Float32Array(4 * side * side)
    for (let c = 0; c < 4; c++) {
      for (let i = 0; i < side * side; i++) {
        data[c * side * side + i] = g[i] * MIX_W[c] + MIX_B[c]
      }
    }
    return { data, channels: 4, side }
  }

  decodeLatent (latent: Latent): GrayImage {
    const side = latent.side
    const plane = side * side
    const g = new Float32Array(plane)
    for (let i = 0; i < plane; i++) {
      let acc = 0
      for (let c = 0; c < latent.channels; c++) {
        acc += MIX_W[c] * (latent.data[c * plane + i] - MIX_B[c])
      }
      g[i] = acc / MIX_NORM
    }
    return { data: g, height: side, width: side }
  }

  /** Channel-mean intensity field of the latent, pooled to an r x r grid. */
  private valueField (latent: Latent, resolution: number): Float32Array {
    const plane = latent.side * latent.side
    const mean = new Float32Array(plane)
    for (let i = 0; i < plane; i++) {
      let acc = 0
      for (let c = 0; c < latent.channels; c++) acc += latent.data[c * plane + i]
      mean[i] = acc / latent.channels
    }
    const asImage: GrayImage = { data: mean, height: latent.side, width: latent.side }
    return blockMean(asImage, resolution)
  }

  private captureCross (v: Float32Array, resolution: number, layer: number, tokens: Token[], sink: AttentionSink): void {
    const T = tokens.length
    const bw = 0.15 * (1 + 0.2 * layer)
    const inv = 1 / (2 * bw * bw)
    const embeds = tokens.map(t => tokenValue(t.piece))
    const data = new Float32Array(resolution * resolution * T)
    const logits = new Float64Array(T)
    for (let q = 0; q < resolution * resolution; q++) {
      let maxLogit = -Infinity
      for (let k = 0; k < T; k++) {
        const d = v[q] - embeds[k]
        logits[k] = -d * d * inv
        if (logits[k] > maxLogit) maxLogit = logits[k]
      }
      let denom = 0
      for (let k = 0; k < T; k++) {
        logits[k] = Math.exp(logits[k] - maxLogit)
        denom += logits[k]
      }
      for (let k = 0; k < T; k++) data[q * T + k] = logits[k] / denom
    }
    sink.cross(resolution, layer, data, T)
  }

  private captureSelf (v: Float32Array, resolution: number, layer: number, sink: AttentionSink): void {
    const n = resolution * resolution
    const sigma = 0.12 * resolution * (1 + 0.3 * layer)
    const spatialInv = 1 / (2 * sigma * sigma)
    const beta = 0.18 * (1 + 0.15 * layer)
    const valueInv = 1 / (2 * beta * beta)
    const data = new Float32Array(n * n)
    const logits = new Float64Array(n)
    for (let qi = 0; qi < resolution; qi++) {
      for (let qj = 0; qj < resolution; qj++) {
        const q = qi * resolution + qj
        let maxLogit = -Infinity
        for (let ki = 0; ki < resolution; ki++) {
          for (let kj = 0; kj < resolution; kj++) {
            const k = ki * resolution + kj
            const d2 = (qi - ki) * (qi - ki) + (qj - kj) * (qj - kj)
            const dv = v[q] - v[k]
            const logit = -d2 * spatialInv - dv * dv * valueInv
            logits[k] = logit
            if (logit > maxLogit) maxLogit = logit
          }
        }
        let denom = 0
        for (let k = 0; k < n; k++) {
          logits[k] = Math.exp(logits[k] - maxLogit)
          denom += logits[k]
        }
        for (let k = 0; k < n; k++) data[q * n + k] = logits[k] / denom
      }
    }
    sink.self(resolution, layer, data)
  }

  predictNoise (latent: Latent, t: number, tokens: Token[] | null, sink?: AttentionSink): Float32Array {
    const plane = latent.side * latent.side
    const signal = tokenChannelSignal(tokens ?? [])
    const eps = new Float32Array(latent.data.length)
    for (let c = 0; c < latent.channels; c++) {
      for (let i = 0; i < plane; i++) {
        const idx = c * plane + i
        eps[idx] = NOISE_DRIFT * latent.data[idx] + NOISE_PULL * signal[c]
      }
    }
    if (sink && tokens) {
      for (const r of this.attentionResolutions) {
        const v = this.valueField(latent, r)
        for (let layer = 0; layer < this.layersPerResolution; layer++) {
          this.captureCross(v, r, layer, tokens, sink)
          this.captureSelf(v, r, layer, sink)
        }
      }
    }
    return eps
  }
}

registerBackend('synthetic', options => new SyntheticBackend(options))
