/** Pluggable diffusion backend: latent codec + noise prediction + hooks.
 *
 * Any model that exposes post-softmax attention at the four canvas-derived
 * resolutions can sit behind this interface. The repository ships a
 * deterministic synthetic backend for development and CI; real inference
 * engines plug in through `loadBackend` without touching the export logic.
 */

import { ModelLoadError } from './errors.js'
import type { GrayImage } from './image.js'
import type { Token } from './tokenizer.js'

export interface Latent {
  data: Float32Array // channel-major, channels * side * side
  channels: number
  side: number
}

export interface AttentionSink {
  /** Post-softmax cross-attention weights, shape (r, r, T), C order. */
  cross (resolution: number, layer: number, data: Float32Array, tokenCount: number): void
  /** Post-softmax self-attention weights, shape (r, r, r, r), C order. */
  self (resolution: number, layer: number, data: Float32Array): void
}

export interface DiffusionBackend {
  readonly modelId: string
  readonly latentSide: number
  readonly attentionResolutions: number[]
  readonly layersPerResolution: number
  encodeImage (image: GrayImage): Latent
  decodeLatent (latent: Latent): GrayImage
  /** Predict noise at timestep t; tokens = null runs the unconditional
   *  branch. When a sink is given, every attention layer is captured. */
  predictNoise (latent: Latent, t: number, tokens: Token[] | null, sink?: AttentionSink): Float32Array
}

export interface BackendOptions {
  latentSide?: number
  layersPerResolution?: number
  dropResolutions?: number[]
}

export type BackendFactory = (options: BackendOptions) => DiffusionBackend

const registry = new Map<string, BackendFactory>()

export function registerBackend (id: string, factory: BackendFactory): void {
  registry.set(id, factory)
}

export function loadBackend (modelId: string, options: BackendOptions = {}): DiffusionBackend {
  const factory = registry.get(modelId)
  if (!factory) {
    const known = [...registry.keys()].sort().join(', ')
    throw new ModelLoadError(`cannot load model ${JSON.stringify(modelId)}; available backends: ${known}`)
  }
  return factory(options)
}
