/** IEEE 754 half-precision packing for runtimes without Float16Array. */

const f32buf = new Float32Array(1)
const u32buf = new Uint32Array(f32buf.buffer)

/** Round a float to the nearest representable half (ties to even). */
export function packHalf (value: number): number {
  f32buf[0] = value
  const bits = u32buf[0]
  const sign = (bits >>> 16) & 0x8000
  let exp = (bits >>> 23) & 0xff
  let mant = bits & 0x7fffff

  if (exp === 0xff) {
    // inf / nan
    return sign | 0x7c00 | (mant ? 0x200 : 0)
  }
  // rebias 127 -> 15
  exp = exp - 127 + 15
  if (exp >= 0x1f) return sign | 0x7c00 // overflow -> inf
  if (exp <= 0) {
    if (exp < -10) return sign // underflow -> signed zero
    // subnormal: shift in the implicit leading 1
    mant = (mant | 0x800000) >>> (1 - exp)
    // round to nearest even on the 13 dropped bits
    if ((mant & 0x1fff) > 0x1000 || ((mant & 0x1fff) === 0x1000 && (mant & 0x2000))) {
      mant += 0x2000
    }
    return sign | (mant >>> 13)
  }
  let half = sign | (exp << 10) | (mant >>> 13)
  const rest = mant & 0x1fff
  if (rest > 0x1000 || (rest === 0x1000 && (half & 1))) half += 1
  return half
}

export function unpackHalf (half: number): number {
  const sign = (half & 0x8000) ? -1 : 1
  const exp = (half >>> 10) & 0x1f
  const mant = half & 0x3ff
  if (exp === 0) return sign * mant * 2 ** -24
  if (exp === 0x1f) return mant ? Number.NaN : sign * Number.POSITIVE_INFINITY
  return sign * (1024 + mant) * 2 ** (exp - 25)
}
