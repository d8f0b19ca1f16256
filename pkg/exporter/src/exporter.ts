/** Orchestrates one export: prompt plan, (1+1)-step inversion round trip,
 *  attention capture during the final denoising hop, and dump writing in
 *  the consumer's directory format. */

import { mkdirSync, writeFileSync } from 'node:fs'
import { join } from 'node:path'

import type { AttentionSink, DiffusionBackend, Latent } from './backend.js'
import { ExporterError, EXIT_IO, PromptError, ResolutionMismatchError } from './errors.js'
import { hflipImage, meanSquaredError, resizeImage, type GrayImage } from './image.js'
import { writeNpy, type NpyDtype } from './npy.js'
import { buildClassOnlyPlan, buildPrompts, type PromptPlan } from './prompts.js'
import { blendGuidance, DdimSchedule, DEFAULT_SCHEDULE, type ScheduleConfig } from './scheduler.js'

export interface InversionConfig {
  modelId: string
  inversionSteps: number
  denoisingSteps: number
  guidanceWeight: number
  allowGuidanceOverride: boolean
  imageSize: number
  schedule: ScheduleConfig
  dtype: NpyDtype
  preaverage: boolean
  separateClassKeys: boolean
  warn: (message: string) => void
}

export function defaultConfig (overrides: Partial<InversionConfig> = {}): InversionConfig {
  return {
    modelId: 'synthetic',
    inversionSteps: 1,
    denoisingSteps: 1,
    guidanceWeight: 1.0,
    allowGuidanceOverride: false,
    imageSize: 512,
    schedule: DEFAULT_SCHEDULE,
    dtype: 'float32',
    preaverage: false,
    separateClassKeys: false,
    warn: message => console.warn(message),
    ...overrides,
  }
}

function checkConfig (config: InversionConfig, backend: DiffusionBackend): void {
  if (config.inversionSteps < 1 || config.denoisingSteps < 1) {
    throw new ExporterError(
      `steps must be >= 1 each, got ${config.inversionSteps}+${config.denoisingSteps}`,
    )
  }
  if (config.guidanceWeight !== 1.0) {
    if (!config.allowGuidanceOverride) {
      throw new PromptError(
        `guidance weight is fixed to 1.0 for inversion (got ${config.guidanceWeight}); ` +
        'pass the explicit override flag to change it',
      )
    }
    config.warn(
      `warning: guidance weight ${config.guidanceWeight} != 1 blends in the unconditional ` +
      'branch; inversion becomes less stable and can introduce semantic drift',
    )
  }
  if (backend.latentSide * 8 !== config.imageSize) {
    throw new ResolutionMismatchError(
      `model ${backend.modelId} has latent side ${backend.latentSide}, which implies image size ` +
      `${backend.latentSide * 8}; got --size ${config.imageSize}`,
    )
  }
  const required = [8, 4, 2, 1].map(d => backend.latentSide / d)
  const have = new Set(backend.attentionResolutions)
  const missing = required.filter(r => !have.has(r))
  if (missing.length) {
    throw new ResolutionMismatchError(
      `model ${backend.modelId} lacks attention at resolution(s) ${missing.join(', ')}; ` +
      `found: ${backend.attentionResolutions.join(', ')}`,
    )
  }
}

interface CapturedStacks {
  cross: Map<number, Float32Array[]> // resolution -> layers in hook order
  self: Map<number, Float32Array[]>
  tokenCount: number
}

function makeSink (): { sink: AttentionSink, stacks: CapturedStacks } {
  const stacks: CapturedStacks = { cross: new Map(), self: new Map(), tokenCount: 0 }
  const sink: AttentionSink = {
    cross (resolution, layer, data, tokenCount) {
      const rail = stacks.cross.get(resolution) ?? []
      if (rail.length !== layer) {
        throw new ExporterError(`cross r=${resolution} layer ${layer} arrived out of order`)
      }
      if (stacks.tokenCount && stacks.tokenCount !== tokenCount) {
        throw new ExporterError(
          `token count changed mid-capture: ${stacks.tokenCount} then ${tokenCount}`,
        )
      }
      stacks.tokenCount = tokenCount
      rail.push(data)
      stacks.cross.set(resolution, rail)
    },
    self (resolution, layer, data) {
      const rail = stacks.self.get(resolution) ?? []
      if (rail.length !== layer) {
        throw new ExporterError(`self r=${resolution} layer ${layer} arrived out of order`)
      }
      rail.push(data)
      stacks.self.set(resolution, rail)
    },
  }
  return { sink, stacks }
}

function averageLayers (layers: Float32Array[]): Float32Array[] {
  if (layers.length === 1) return layers
  const out = new Float64Array(layers[0].length)
  for (const layer of layers) {
    for (let i = 0; i < out.length; i++) out[i] += layer[i]
  }
  const mean = new Float32Array(out.length)
  for (let i = 0; i < out.length; i++) mean[i] = out[i] / layers.length
  return [mean]
}

export interface TensorEntry {
  kind: 'cross' | 'self'
  resolution: number
  layer: number
  file: string
  shape: number[]
  dtype: NpyDtype
}

export interface ExportResult {
  dir: string
  manifest: Record<string, unknown>
  reconstructionMse: number
  tokenCount: number
  resolutions: number[]
  tensorFiles: number
}

function roundSig (value: number, digits: number): number {
  return value === 0 ? 0 : Number(value.toPrecision(digits))
}

/** One inversion round trip with attention capture, written as a dump dir. */
export function invertAndCapture (
  image: GrayImage,
  caption: string,
  classNames: string[],
  config: InversionConfig,
  backend: DiffusionBackend,
  outDir: string,
  flipped = false,
): ExportResult {
  checkConfig(config, backend)
  const plan = buildPrompts(caption, classNames)
  const keysPlan = config.separateClassKeys ? buildClassOnlyPlan(plan) : plan

  const resized = resizeImage(image, config.imageSize, config.imageSize)
  const schedule = new DdimSchedule(config.schedule)
  const w = config.guidanceWeight

  const predict = (z: Latent, t: number, sink?: AttentionSink, keys = plan): Float32Array => {
    const cond = backend.predictNoise(z, t, keys.tokens, sink)
    if (w === 1) return cond
    const uncond = backend.predictNoise(z, t, null)
    return blendGuidance(cond, uncond, w)
  }

  // forward: walk the latent up the noise ladder
  let z = backend.encodeImage(resized)
  const upLadder = [0, ...schedule.timesteps(config.inversionSteps)]
  for (let i = 0; i + 1 < upLadder.length; i++) {
    const eps = predict(z, upLadder[i])
    z = { ...z, data: schedule.step(z.data, eps, upLadder[i], upLadder[i + 1]) }
  }

  // reverse: denoise back down, capturing on the final hop (z1 -> z0)
  const downLadder = [...schedule.timesteps(config.denoisingSteps).reverse(), 0]
  const { sink, stacks } = makeSink()
  for (let i = 0; i + 1 < downLadder.length; i++) {
    const last = i + 2 === downLadder.length
    const eps = predict(z, downLadder[i], last && !config.separateClassKeys ? sink : undefined)
    if (last && config.separateClassKeys) {
      // capture-only pass with the class prompt re-encoded alone
      backend.predictNoise(z, downLadder[i], keysPlan.tokens, sink)
    }
    z = { ...z, data: schedule.step(z.data, eps, downLadder[i], downLadder[i + 1]) }
  }

  const reconstructed = resizeImage(backend.decodeLatent(z), config.imageSize, config.imageSize)
  const mse = roundSig(meanSquaredError(resized, reconstructed), 9)

  return writeDumpDirectory(outDir, config, backend, keysPlan, plan.prompt, stacks, mse, flipped)
}

function writeDumpDirectory (
  outDir: string,
  config: InversionConfig,
  backend: DiffusionBackend,
  keysPlan: PromptPlan,
  prompt: string,
  stacks: CapturedStacks,
  mse: number,
  flipped: boolean,
): ExportResult {
  try {
    mkdirSync(outDir, { recursive: true })
  } catch (err) {
    throw new ExporterError(`cannot create dump directory ${outDir}: ${(err as Error).message}`, EXIT_IO)
  }

  const entries: TensorEntry[] = []
  const resolutions = [...stacks.cross.keys()].sort((a, b) => a - b)
  const T = stacks.tokenCount
  for (const kind of ['cross', 'self'] as const) {
    const rails = kind === 'cross' ? stacks.cross : stacks.self
    for (const r of [...rails.keys()].sort((a, b) => a - b)) {
      let layers = rails.get(r)!
      if (config.preaverage) layers = averageLayers(layers)
      layers.forEach((data, layer) => {
        const shape = kind === 'cross' ? [r, r, T] : [r, r, r, r]
        const file = `${kind}_r${r}_l${layer}.npy`
        writeNpy(join(outDir, file), data, shape, config.dtype)
        entries.push({ kind, resolution: r, layer, file, shape, dtype: config.dtype })
      })
    }
  }

  const manifest: Record<string, unknown> = {
    format_version: 1,
    model_id: backend.modelId,
    prompt,
    class_prompt: keysPlan.classPrompt,
    image_height: config.imageSize,
    image_width: config.imageSize,
    flipped,
    layers_preaveraged: config.preaverage,
    canvas_side: backend.latentSide,
    reconstruction_mse: mse,
    guidance_weight: config.guidanceWeight,
    classes: keysPlan.classes.map(({ name, span }) => ({ name, span })),
    tensors: entries,
  }
  try {
    writeFileSync(join(outDir, 'manifest.json'), JSON.stringify(manifest, null, 2) + '\n')
  } catch (err) {
    throw new ExporterError(`cannot write manifest in ${outDir}: ${(err as Error).message}`, EXIT_IO)
  }
  return {
    dir: outDir,
    manifest,
    reconstructionMse: mse,
    tokenCount: T,
    resolutions,
    tensorFiles: entries.length,
  }
}

/** Export the image and its horizontal mirror as an origin/flipped pair. */
export function exportTtfPair (
  image: GrayImage,
  caption: string,
  classNames: string[],
  config: InversionConfig,
  backend: DiffusionBackend,
  outDir: string,
): { origin: ExportResult, flipped: ExportResult } {
  const origin = invertAndCapture(image, caption, classNames, config, backend, join(outDir, 'origin'), false)
  const mirrored = invertAndCapture(
    hflipImage(image), caption, classNames, config, backend, join(outDir, 'flipped'), true,
  )
  return { origin, flipped: mirrored }
}
