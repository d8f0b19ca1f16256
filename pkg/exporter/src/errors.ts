/** Error taxonomy with process exit codes matching the consumer CLI:
 *  0 success, 1 usage, 2 invalid data, 3 I/O or model loading. */

export const EXIT_OK = 0
export const EXIT_USAGE = 1
export const EXIT_DATA = 2
export const EXIT_IO = 3

export class ExporterError extends Error {
  readonly exitCode: number

  constructor (message: string, exitCode: number = EXIT_DATA) {
    super(message)
    this.name = new.target.name
    this.exitCode = exitCode
  }
}

/** Bad caption/class/config values. */
export class PromptError extends ExporterError {}

/** Prompt tokenizes past the text-encoder limit. */
export class PromptLengthError extends PromptError {}

/** Backend cannot be constructed (unknown id, bad options). */
export class ModelLoadError extends ExporterError {
  constructor (message: string) {
    super(message, EXIT_IO)
  }
}

/** Backend architecture lacks a required attention resolution. */
export class ResolutionMismatchError extends ExporterError {}

/** Unreadable or malformed input image. */
export class ImageFormatError extends ExporterError {
  constructor (message: string) {
    super(message, EXIT_IO)
  }
}
