import { writeFileSync } from 'node:fs'
import { join } from 'node:path'
import { describe, expect, it } from 'vitest'

import { ImageFormatError } from '../src/errors.js'
import { blockMean, hflipImage, meanSquaredError, readImage, resizeImage } from '../src/image.js'
import { makeScene, tempDir, writePgm } from './helpers.js'

function writeBlob (name: string, blob: Buffer): string {
  const dir = tempDir('img-')
  const path = join(dir, name)
  writeFileSync(path, blob)
  return path
}

describe('netpbm reading', () => {
  it('reads P5 grayscale scaled to [0, 1]', () => {
    const path = writeBlob('a.pgm', Buffer.concat([
      Buffer.from('P5\n2 2\n255\n'),
      Buffer.from([0, 51, 102, 255]),
    ]))
    const img = readImage(path)
    expect(img.height).toBe(2)
    expect(img.width).toBe(2)
    expect([...img.data]).toEqual([0, Math.fround(51 / 255), Math.fround(102 / 255), 1])
  })

  it('honors maxval and header comments', () => {
    const path = writeBlob('c.pgm', Buffer.concat([
      Buffer.from('P5\n# a comment line\n2 1\n# another\n100\n'),
      Buffer.from([50, 100]),
    ]))
    const img = readImage(path)
    expect([...img.data]).toEqual([0.5, 1])
  })

  it('converts P6 color through the Rec.601 luma weights', () => {
    const path = writeBlob('rgb.ppm', Buffer.concat([
      Buffer.from('P6\n1 1\n255\n'),
      Buffer.from([255, 0, 0]),
    ]))
    const img = readImage(path)
    expect(img.data[0]).toBeCloseTo(0.299, 6)
  })

  it('rejects other magics and truncated payloads', () => {
    const bad = writeBlob('bad.pbm', Buffer.from('P1\n1 1\n1\n'))
    expect(() => readImage(bad)).toThrow(ImageFormatError)
    const short = writeBlob('short.pgm', Buffer.concat([
      Buffer.from('P5\n2 2\n255\n'),
      Buffer.from([1, 2]),
    ]))
    expect(() => readImage(short)).toThrow(ImageFormatError)
  })
})

describe('image operations', () => {
  it('horizontal flip is an involution that mirrors columns', () => {
    const scene = makeScene(32)
    const flipped = hflipImage(scene)
    expect(flipped.data[0]).toBe(scene.data[31])
    const twice = hflipImage(flipped)
    expect([...twice.data]).toEqual([...scene.data])
  })

  it('flip commutes with PGM write and read', () => {
    const scene = makeScene(16)
    const dir = tempDir('img-')
    const path = join(dir, 'flip.pgm')
    writePgm(hflipImage(scene), path)
    const back = readImage(path)
    const direct = hflipImage(scene)
    for (let i = 0; i < back.data.length; i++) {
      expect(Math.abs(back.data[i] - direct.data[i])).toBeLessThan(1 / 255)
    }
  })

  it('resize to the same size copies values', () => {
    const scene = makeScene(16)
    const same = resizeImage(scene, 16, 16)
    expect([...same.data]).toEqual([...scene.data])
  })

  it('bilinear resize preserves corners and stays in range', () => {
    const scene = makeScene(16)
    const big = resizeImage(scene, 40, 40)
    expect(big.data[0]).toBeCloseTo(scene.data[0], 6)
    expect(big.data[39]).toBeCloseTo(scene.data[15], 6)
    expect(big.data[40 * 39]).toBeCloseTo(scene.data[16 * 15], 6)
    for (const v of big.data) {
      expect(v).toBeGreaterThanOrEqual(0)
      expect(v).toBeLessThanOrEqual(1)
    }
  })

  it('block mean averages exact cells and requires divisibility', () => {
    const img = { data: new Float32Array([1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1]), height: 4, width: 4 }
    const pooled = blockMean(img, 2)
    expect([...pooled]).toEqual([1, 0, 0, 1])
    expect(() => blockMean(img, 3)).toThrow(ImageFormatError)
  })

  it('mean squared error is zero on identical images and positive otherwise', () => {
    const scene = makeScene(16)
    expect(meanSquaredError(scene, scene)).toBe(0)
    expect(meanSquaredError(scene, hflipImage(scene))).toBeGreaterThan(0)
  })
})
