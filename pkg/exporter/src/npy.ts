/** Minimal NPY v1.0 tensor serialization (little-endian floats, C order).
 *
 * Byte layout matches the consumer's reference writer exactly: the text
 * header is padded with spaces so magic + version + length + header +
 * newline lands on a 64-byte boundary, and the shape is rendered in Python
 * tuple syntax (trailing comma for 1-tuples).
 */

import { readFileSync, writeFileSync } from 'node:fs'

import { ExporterError, EXIT_IO } from './errors.js'
import { packHalf, unpackHalf } from './float16.js'

const MAGIC = Buffer.from('\x93NUMPY', 'latin1')

export type NpyDtype = 'float32' | 'float16'

const DESCR: Record<NpyDtype, string> = { float32: '<f4', float16: '<f2' }

function shapeTuple (shape: number[]): string {
  if (shape.length === 0) return '()'
  if (shape.length === 1) return `(${shape[0]},)`
  return `(${shape.join(', ')})`
}

export function npyHeader (dtype: NpyDtype, shape: number[]): Buffer {
  let header = `{'descr': '${DESCR[dtype]}', 'fortran_order': False, 'shape': ${shapeTuple(shape)}, }`
  const base = MAGIC.length + 2 + 2 + header.length + 1
  header = header + ' '.repeat((64 - (base % 64)) % 64) + '\n'
  const out = Buffer.alloc(MAGIC.length + 4 + header.length)
  MAGIC.copy(out, 0)
  out[MAGIC.length] = 1 // major version
  out[MAGIC.length + 1] = 0
  out.writeUInt16LE(header.length, MAGIC.length + 2)
  out.write(header, MAGIC.length + 4, 'latin1')
  return out
}

export function encodeNpy (data: Float32Array | Float64Array, shape: number[], dtype: NpyDtype): Buffer {
  const count = shape.reduce((a, b) => a * b, 1)
  if (count !== data.length) {
    throw new ExporterError(`shape [${shape.join(', ')}] holds ${count} values, data has ${data.length}`)
  }
  const header = npyHeader(dtype, shape)
  const itemSize = dtype === 'float32' ? 4 : 2
  const payload = Buffer.alloc(count * itemSize)
  if (dtype === 'float32') {
    for (let i = 0; i < count; i++) payload.writeFloatLE(data[i], i * 4)
  } else {
    for (let i = 0; i < count; i++) payload.writeUInt16LE(packHalf(data[i]), i * 2)
  }
  return Buffer.concat([header, payload])
}

export function writeNpy (path: string, data: Float32Array | Float64Array, shape: number[], dtype: NpyDtype): void {
  try {
    writeFileSync(path, encodeNpy(data, shape, dtype))
  } catch (err) {
    if (err instanceof ExporterError) throw err
    throw new ExporterError(`cannot write tensor ${path}: ${(err as Error).message}`, EXIT_IO)
  }
}

export interface NpyTensor {
  data: Float32Array
  shape: number[]
  dtype: NpyDtype
}

/** Read back an NPY written by this module or the consumer (float32/float16). */
export function readNpy (path: string): NpyTensor {
  let blob: Buffer
  try {
    blob = readFileSync(path)
  } catch (err) {
    throw new ExporterError(`cannot read tensor ${path}: ${(err as Error).message}`, EXIT_IO)
  }
  if (blob.length < 10 || !blob.subarray(0, 6).equals(MAGIC)) {
    throw new ExporterError(`${path}: not an NPY file`)
  }
  if (blob[6] !== 1 || blob[7] !== 0) {
    throw new ExporterError(`${path}: unsupported NPY version ${blob[6]}.${blob[7]}`)
  }
  const headerLen = blob.readUInt16LE(8)
  const header = blob.subarray(10, 10 + headerLen).toString('latin1')
  const descr = /'descr':\s*'([^']+)'/.exec(header)?.[1]
  const shapeText = /'shape':\s*\(([^)]*)\)/.exec(header)?.[1]
  if (!descr || shapeText === undefined || !/'fortran_order':\s*False/.test(header)) {
    throw new ExporterError(`${path}: malformed NPY header ${header.trim()}`)
  }
  const shape = shapeText.split(',').map(s => s.trim()).filter(s => s.length).map(Number)
  const count = shape.reduce((a, b) => a * b, 1)
  const body = blob.subarray(10 + headerLen)
  const data = new Float32Array(count)
  let dtype: NpyDtype
  if (descr === '<f4') {
    if (body.length !== count * 4) throw new ExporterError(`${path}: payload is ${body.length} bytes, expected ${count * 4}`)
    for (let i = 0; i < count; i++) data[i] = body.readFloatLE(i * 4)
    dtype = 'float32'
  } else if (descr === '<f2') {
    if (body.length !== count * 2) throw new ExporterError(`${path}: payload is ${body.length} bytes, expected ${count * 2}`)
    for (let i = 0; i < count; i++) data[i] = unpackHalf(body.readUInt16LE(i * 2))
    dtype = 'float16'
  } else {
    throw new ExporterError(`${path}: unsupported dtype ${descr}`)
  }
  return { data, shape, dtype }
}
