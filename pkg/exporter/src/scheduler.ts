/** Deterministic DDIM stepping over a linear-beta noise schedule.
 *
 * Both directions use the same update rule
 *
 *   z_s = sqrt(abar_s / abar_t) * z_t
 *       + (sqrt(1 - abar_s) - sqrt(abar_s / abar_t) * sqrt(1 - abar_t)) * eps
 *
 * evaluated with the noise prediction at the step's starting point, so one
 * inversion step followed by one denoising step reconstructs the latent up
 * to the prediction drift between the two evaluation points.
 */

import { ExporterError } from './errors.js'

export interface ScheduleConfig {
  trainSteps: number
  betaStart: number
  betaEnd: number
}

export const DEFAULT_SCHEDULE: ScheduleConfig = {
  trainSteps: 1000,
  betaStart: 1e-4,
  betaEnd: 0.02,
}

export class DdimSchedule {
  readonly config: ScheduleConfig
  private readonly alphaBars: Float64Array

  constructor (config: ScheduleConfig = DEFAULT_SCHEDULE) {
    if (config.trainSteps < 1) throw new ExporterError(`trainSteps must be >= 1, got ${config.trainSteps}`)
    this.config = config
    // alphaBars[t] = prod_{i<t} (1 - beta_i); index 0 is the clean image
    this.alphaBars = new Float64Array(config.trainSteps + 1)
    this.alphaBars[0] = 1
    for (let i = 0; i < config.trainSteps; i++) {
      const beta = config.betaStart + ((config.betaEnd - config.betaStart) * i) / Math.max(config.trainSteps - 1, 1)
      this.alphaBars[i + 1] = this.alphaBars[i] * (1 - beta)
    }
  }

  alphaBar (t: number): number {
    if (t < 0 || t > this.config.trainSteps) {
      throw new ExporterError(`timestep ${t} outside [0, ${this.config.trainSteps}]`)
    }
    return this.alphaBars[t]
  }

  /** Noise-level ladder for a K-step traversal: K interior timesteps. */
  timesteps (steps: number): number[] {
    if (steps < 1) throw new ExporterError(`steps must be >= 1, got ${steps}`)
    const out: number[] = []
    for (let i = 1; i <= steps; i++) {
      out.push(Math.round((this.config.trainSteps * i) / (steps + 1)))
    }
    return out
  }

  /** Move a latent from noise level tFrom to tTo given its predicted noise. */
  step (z: Float32Array, eps: Float32Array, tFrom: number, tTo: number): Float32Array {
    if (z.length !== eps.length) {
      throw new ExporterError(`latent length ${z.length} != noise length ${eps.length}`)
    }
    const aFrom = this.alphaBar(tFrom)
    const aTo = this.alphaBar(tTo)
    const scale = Math.sqrt(aTo / aFrom)
    const noiseCoef = Math.sqrt(1 - aTo) - scale * Math.sqrt(1 - aFrom)
    const out = new Float32Array(z.length)
    for (let i = 0; i < z.length; i++) out[i] = scale * z[i] + noiseCoef * eps[i]
    return out
  }
}

/** Classifier-free blend: uncond + w * (cond - uncond); w = 1 is cond only. */
export function blendGuidance (cond: Float32Array, uncond: Float32Array, w: number): Float32Array {
  if (w === 1) return cond
  const out = new Float32Array(cond.length)
  for (let i = 0; i < cond.length; i++) out[i] = uncond[i] + w * (cond[i] - uncond[i])
  return out
}
