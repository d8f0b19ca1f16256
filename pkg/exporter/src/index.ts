export { EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_IO, ExporterError, PromptError, PromptLengthError, ModelLoadError, ResolutionMismatchError, ImageFormatError } from './errors.js'
export { packHalf, unpackHalf } from './float16.js'
export { encodeNpy, writeNpy, readNpy, type NpyDtype } from './npy.js'
export { encode, decode, finalize, encodeClassName, MAX_TOKENS, BOS, EOS } from './tokenizer.js'
export { buildPrompts, buildClassOnlyPlan, type PromptPlan, type ClassSpan } from './prompts.js'
export { readImage, hflipImage, resizeImage, blockMean, meanSquaredError, type GrayImage } from './image.js'
export { DdimSchedule, DEFAULT_SCHEDULE, blendGuidance, type ScheduleConfig } from './scheduler.js'
export { loadBackend, registerBackend, type DiffusionBackend, type BackendOptions, type AttentionSink, type Latent } from './backend.js'
export { SyntheticBackend } from './synthetic.js'
export { defaultConfig, invertAndCapture, exportTtfPair, type InversionConfig, type ExportResult, type TensorEntry } from './exporter.js'
export { run } from './cli.js'
