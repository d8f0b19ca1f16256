#!/usr/bin/env node
/** attn-export: run a (1+1)-step inversion round trip over an image and
 *  write captured attention as a dump directory for the segmentation CLI. */

import { pathToFileURL } from 'node:url'
import { parseArgs } from 'node:util'

import { loadBackend, type BackendOptions } from './backend.js'
import { EXIT_OK, EXIT_USAGE, ExporterError } from './errors.js'
import { defaultConfig, exportTtfPair, invertAndCapture, type ExportResult } from './exporter.js'
import { readImage } from './image.js'
import type { NpyDtype } from './npy.js'
import './synthetic.js'

const USAGE = `usage: attn-export --image FILE.pgm --caption TEXT --classes "a, b, c" --out DIR
                   [--ttf] [--preaverage] [--separate-class-keys]
                   [--model NAME] [--size N] [--latent-side N] [--layers N]
                   [--steps K+K] [--guidance W] [--allow-guidance-override]
                   [--dtype float32|float16] [--drop-resolution R ...]

Inverts the image into the model's latent space, denoises it back while
recording cross- and self-attention, and writes one dump directory (or an
origin/flipped pair under DIR with --ttf) that downstream mask refinement
can consume as-is.`

function parseSteps (text: string): [number, number] {
  const match = /^(\d+)\+(\d+)$/.exec(text.trim())
  if (!match) {
    throw new ExporterError(`--steps expects the form K+K (e.g. 1+1), got '${text}'`, EXIT_USAGE)
  }
  return [Number(match[1]), Number(match[2])]
}

function parsePositiveInt (text: string, flag: string): number {
  const value = Number(text)
  if (!Number.isInteger(value) || value <= 0) {
    throw new ExporterError(`${flag} expects a positive integer, got '${text}'`, EXIT_USAGE)
  }
  return value
}

function summarize (result: ExportResult, label: string): void {
  process.stdout.write(
    `${label}: ${result.tensorFiles} tensors at r in {${result.resolutions.join(', ')}}, ` +
    `${result.tokenCount} tokens, reconstruction mse ${result.reconstructionMse}\n` +
    `  -> ${result.dir}\n`,
  )
}

export function run (argv: string[]): number {
  let parsed
  try {
    parsed = parseArgs({
      args: argv,
      allowPositionals: false,
      strict: true,
      options: {
        image: { type: 'string' },
        caption: { type: 'string' },
        classes: { type: 'string' },
        out: { type: 'string' },
        ttf: { type: 'boolean', default: false },
        preaverage: { type: 'boolean', default: false },
        'separate-class-keys': { type: 'boolean', default: false },
        model: { type: 'string', default: 'synthetic' },
        size: { type: 'string', default: '512' },
        'latent-side': { type: 'string' },
        layers: { type: 'string' },
        steps: { type: 'string', default: '1+1' },
        guidance: { type: 'string', default: '1.0' },
        'allow-guidance-override': { type: 'boolean', default: false },
        dtype: { type: 'string', default: 'float32' },
        'drop-resolution': { type: 'string', multiple: true, default: [] },
        help: { type: 'boolean', default: false },
      },
    })
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n${USAGE}\n`)
    return EXIT_USAGE
  }
  const opts = parsed.values
  if (opts.help) {
    process.stdout.write(USAGE + '\n')
    return EXIT_OK
  }

  try {
    for (const flag of ['image', 'caption', 'classes', 'out'] as const) {
      if (!opts[flag]) {
        throw new ExporterError(`missing required flag --${flag}`, EXIT_USAGE)
      }
    }
    if (opts.dtype !== 'float32' && opts.dtype !== 'float16') {
      throw new ExporterError(`--dtype must be float32 or float16, got '${opts.dtype}'`, EXIT_USAGE)
    }
    const guidance = Number(opts.guidance)
    if (!Number.isFinite(guidance)) {
      throw new ExporterError(`--guidance expects a number, got '${opts.guidance}'`, EXIT_USAGE)
    }
    const [inversionSteps, denoisingSteps] = parseSteps(opts.steps!)
    const size = parsePositiveInt(opts.size!, '--size')

    const backendOptions: BackendOptions = {
      latentSide: opts['latent-side']
        ? parsePositiveInt(opts['latent-side'], '--latent-side')
        : Math.floor(size / 8),
      dropResolutions: opts['drop-resolution']!.map(r => parsePositiveInt(r, '--drop-resolution')),
    }
    if (opts.layers) backendOptions.layersPerResolution = parsePositiveInt(opts.layers, '--layers')
    const backend = loadBackend(opts.model!, backendOptions)

    const config = defaultConfig({
      modelId: opts.model!,
      inversionSteps,
      denoisingSteps,
      guidanceWeight: guidance,
      allowGuidanceOverride: opts['allow-guidance-override']!,
      imageSize: size,
      dtype: opts.dtype as NpyDtype,
      preaverage: opts.preaverage!,
      separateClassKeys: opts['separate-class-keys']!,
      warn: message => process.stderr.write(message + '\n'),
    })

    const image = readImage(opts.image!)
    const classNames = opts.classes!.split(',').map(s => s.trim()).filter(Boolean)

    if (opts.ttf) {
      const pair = exportTtfPair(image, opts.caption!, classNames, config, backend, opts.out!)
      summarize(pair.origin, 'origin')
      summarize(pair.flipped, 'flipped')
    } else {
      const result = invertAndCapture(image, opts.caption!, classNames, config, backend, opts.out!)
      summarize(result, 'export')
    }
    return EXIT_OK
  } catch (err) {
    if (err instanceof ExporterError) {
      process.stderr.write(`error: ${err.message}\n`)
      if (err.exitCode === EXIT_USAGE) process.stderr.write(USAGE + '\n')
      return err.exitCode
    }
    throw err
  }
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exitCode = run(process.argv.slice(2))
}
