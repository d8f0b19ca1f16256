import { describe, expect, it } from 'vitest'

import { blendGuidance, DdimSchedule, DEFAULT_SCHEDULE } from '../src/scheduler.js'

describe('ddim schedule', () => {
  const schedule = new DdimSchedule(DEFAULT_SCHEDULE)

  it('starts at alpha-bar one and decreases monotonically', () => {
    expect(schedule.alphaBar(0)).toBe(1)
    let prev = 1
    for (let t = 1; t <= DEFAULT_SCHEDULE.trainSteps; t += 50) {
      const ab = schedule.alphaBar(t)
      expect(ab).toBeLessThan(prev)
      expect(ab).toBeGreaterThan(0)
      prev = ab
    }
  })

  it('places k interior timesteps evenly over the training range', () => {
    expect(schedule.timesteps(1)).toEqual([500])
    expect(schedule.timesteps(3)).toEqual([250, 500, 750])
  })

  it('rejects out-of-range queries', () => {
    expect(() => schedule.alphaBar(-1)).toThrow()
    expect(() => schedule.alphaBar(DEFAULT_SCHEDULE.trainSteps + 1)).toThrow()
  })

  it('inverts exactly when the same noise drives both directions', () => {
    const z0 = new Float32Array([0.3, -1.2, 0.05, 2.4])
    const eps = new Float32Array([0.1, -0.2, 0.4, 0.0])
    const z1 = schedule.step(z0, eps, 0, 500)
    const back = schedule.step(z1, eps, 500, 0)
    for (let i = 0; i < z0.length; i++) {
      expect(back[i]).toBeCloseTo(z0[i], 5)
    }
  })

  it('adds noise energy on the way up', () => {
    const z0 = new Float32Array([0.5, 0.5])
    const eps = new Float32Array([1, -1])
    const z1 = schedule.step(z0, eps, 0, 500)
    // signal shrinks by sqrt(alpha-bar), noise enters at sqrt(1 - alpha-bar)
    const ab = schedule.alphaBar(500)
    expect(z1[0]).toBeCloseTo(Math.sqrt(ab) * 0.5 + Math.sqrt(1 - ab) * 1, 6)
    expect(z1[1]).toBeCloseTo(Math.sqrt(ab) * 0.5 - Math.sqrt(1 - ab) * 1, 6)
  })
})

describe('guidance blending', () => {
  it('returns the conditional branch untouched at weight one', () => {
    const cond = new Float32Array([1, 2])
    const uncond = new Float32Array([5, 5])
    expect(blendGuidance(cond, uncond, 1)).toBe(cond)
  })

  it('extrapolates beyond the conditional branch for weight above one', () => {
    const cond = new Float32Array([2, 0])
    const uncond = new Float32Array([1, 1])
    const blended = blendGuidance(cond, uncond, 3)
    // u + w (c - u)
    expect([...blended]).toEqual([4, -2])
  })
})
