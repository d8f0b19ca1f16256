/** Dual-prompt construction: caption plus comma-joined class vocabulary.
 *
 * The export prompt is "{caption}; {class prompt}". Class token spans are
 * recorded while the class prompt is tokenized in place inside the full
 * sequence, and every span is decode-verified against its class name before
 * anything downstream trusts it.
 */

import { PromptError } from './errors.js'
import { decode, encode, encodeClassName, finalize, normalize, type Token } from './tokenizer.js'

export interface ClassSpan {
  name: string
  span: [number, number] // half-open over the full token sequence
}

export interface PromptPlan {
  prompt: string
  classPrompt: string
  tokens: Token[] // BOS ... EOS, keys for cross-attention
  classes: ClassSpan[]
}

export function buildPrompts (caption: string, classNames: string[]): PromptPlan {
  if (classNames.length === 0) {
    throw new PromptError('need at least one class name')
  }
  const cleaned = classNames.map(normalize)
  cleaned.forEach((name, i) => {
    if (!name) throw new PromptError(`class name ${JSON.stringify(classNames[i])} is empty`)
  })
  const dupes = cleaned.filter((name, i) => cleaned.indexOf(name) !== i)
  if (dupes.length) {
    throw new PromptError(`duplicate class names: ${[...new Set(dupes)].join(', ')}`)
  }

  const classPrompt = cleaned.join(', ')
  const prompt = `${normalize(caption)}; ${classPrompt}`

  const body: Token[] = [...encode(caption)]
  body.push(...encode(';'))
  const spans: ClassSpan[] = []
  cleaned.forEach((name, i) => {
    if (i > 0) body.push(...encode(','))
    const classTokens = encodeClassName(name)
    const start = body.length + 1 // +1 for the BOS budget
    body.push(...classTokens)
    spans.push({ name, span: [start, start + classTokens.length] })
  })

  const tokens = finalize(body, `prompt ${JSON.stringify(prompt)}`)
  for (const { name, span } of spans) {
    const roundTrip = decode(tokens.slice(span[0], span[1]))
    if (roundTrip !== name) {
      throw new PromptError(
        `span [${span[0]}, ${span[1]}) decodes to ${JSON.stringify(roundTrip)}, expected ${JSON.stringify(name)}`,
      )
    }
  }
  return { prompt, classPrompt, tokens, classes: spans }
}

/** Re-tokenize the class prompt alone (separate-keys capture mode). */
export function buildClassOnlyPlan (plan: PromptPlan): PromptPlan {
  const body: Token[] = []
  const spans: ClassSpan[] = []
  plan.classes.forEach(({ name }, i) => {
    if (i > 0) body.push(...encode(','))
    const classTokens = encodeClassName(name)
    const start = body.length + 1
    body.push(...classTokens)
    spans.push({ name, span: [start, start + classTokens.length] })
  })
  return {
    prompt: plan.prompt,
    classPrompt: plan.classPrompt,
    tokens: finalize(body, `class prompt ${JSON.stringify(plan.classPrompt)}`),
    classes: spans,
  }
}
