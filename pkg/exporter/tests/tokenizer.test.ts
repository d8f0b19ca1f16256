import { describe, expect, it } from 'vitest'

import { PromptError, PromptLengthError } from '../src/errors.js'
import { buildClassOnlyPlan, buildPrompts } from '../src/prompts.js'
import { BOS, decode, encode, encodeClassName, EOS, finalize, MAX_TOKENS } from '../src/tokenizer.js'

describe('tokenizer', () => {
  it('maps vocabulary words to single tokens', () => {
    const tokens = encode('a photo of a dog')
    expect(tokens.map(t => t.piece)).toEqual(['a', 'photo', 'of', 'a', 'dog'])
    expect(tokens[0].id).toBe(tokens[3].id)
  })

  it('falls back to character pieces for unknown words', () => {
    const tokens = encode('zebra')
    expect(tokens.map(t => t.piece)).toEqual(['z', '##e', '##b', '##r', '##a'])
    expect(decode(tokens)).toBe('zebra')
  })

  it('round-trips normalized text through decode', () => {
    for (const text of [
      'a photo of a dog',
      'TV  Monitor, dog, person',
      'a zebra next to the barrel; sky.',
      'weird-hyphen and 42 numbers',
    ]) {
      const normalized = text.toLowerCase().replace(/\s+/g, ' ').trim()
      expect(decode(encode(text))).toBe(normalized)
    }
  })

  it('gives identical ids to repeated pieces across calls', () => {
    const first = encode('qux')
    const second = encode('qux')
    expect(first.map(t => t.id)).toEqual(second.map(t => t.id))
  })

  it('wraps sequences in begin and end markers', () => {
    const tokens = finalize(encode('a dog'), 'prompt')
    expect(tokens[0].piece).toBe(BOS)
    expect(tokens.at(-1)?.piece).toBe(EOS)
    expect(tokens).toHaveLength(4)
  })

  it('rejects sequences over the 77-token limit with the overage count', () => {
    const body = encode(Array(80).fill('dog').join(' '))
    expect(() => finalize(body, 'prompt')).toThrow(PromptLengthError)
    expect(() => finalize(body, 'prompt')).toThrow(/82 tokens, 5 over the 77-token limit/)
    expect(finalize(body.slice(0, MAX_TOKENS - 2), 'prompt')).toHaveLength(MAX_TOKENS)
  })

  it('rejects class names that tokenize to nothing', () => {
    expect(() => encodeClassName('  ')).toThrow(PromptError)
  })
})

describe('prompt construction', () => {
  it('builds "caption; classes" with one span per class', () => {
    const plan = buildPrompts('a photo', ['dog'])
    expect(plan.prompt).toBe('a photo; dog')
    expect(plan.classPrompt).toBe('dog')
    expect(plan.classes).toHaveLength(1)
    const [lo, hi] = plan.classes[0].span
    expect(hi - lo).toBe(1)
    expect(decode(plan.tokens.slice(lo, hi))).toBe('dog')
  })

  it('keeps multiword classes as contiguous spans', () => {
    const plan = buildPrompts('a living room', ['tv monitor', 'dog', 'person'])
    expect(plan.classPrompt).toBe('tv monitor, dog, person')
    expect(plan.prompt).toBe('a living room; tv monitor, dog, person')
    for (const { name, span } of plan.classes) {
      expect(decode(plan.tokens.slice(span[0], span[1]))).toBe(name)
    }
    expect(plan.classes[0].span[1] - plan.classes[0].span[0]).toBe(2)
    // spans are disjoint and ordered
    for (let i = 1; i < plan.classes.length; i++) {
      expect(plan.classes[i].span[0]).toBeGreaterThanOrEqual(plan.classes[i - 1].span[1])
    }
  })

  it('covers unknown class names through the character fallback', () => {
    const plan = buildPrompts('a photo', ['axolotl'])
    const { span } = plan.classes[0]
    expect(span[1] - span[0]).toBeGreaterThan(1)
    expect(decode(plan.tokens.slice(span[0], span[1]))).toBe('axolotl')
  })

  it('spans index the marker-wrapped sequence, not the body', () => {
    const plan = buildPrompts('dog', ['dog'])
    // BOS, dog, ;, dog, EOS -> class span is position 3
    expect(plan.tokens.map(t => t.piece)).toEqual([BOS, 'dog', ';', 'dog', EOS])
    expect(plan.classes[0].span).toEqual([3, 4])
  })

  it('rejects empty class lists, empty names, and duplicates', () => {
    expect(() => buildPrompts('a photo', [])).toThrow(PromptError)
    expect(() => buildPrompts('a photo', ['dog', ' '])).toThrow(/is empty/)
    expect(() => buildPrompts('a photo', ['dog', 'Dog'])).toThrow(/duplicate class names: dog/)
  })

  it('re-tokenizes the class prompt alone for separate-keys capture', () => {
    const plan = buildPrompts('a photo of a dog and a person', ['dog', 'person'])
    const keysOnly = buildClassOnlyPlan(plan)
    expect(keysOnly.tokens.length).toBeLessThan(plan.tokens.length)
    expect(keysOnly.tokens.map(t => t.piece)).toEqual([BOS, 'dog', ',', 'person', EOS])
    for (const { name, span } of keysOnly.classes) {
      expect(decode(keysOnly.tokens.slice(span[0], span[1]))).toBe(name)
    }
  })
})
