/** Deterministic prompt tokenizer with a CLIP-like contract.
 *
 * Text is lowercased and split into words and punctuation marks. Words in
 * the built-in vocabulary become single tokens; anything else falls back to
 * character pieces (continuations carry a "##" marker), so rare words span
 * several tokens the way BPE subwords do. Sequences are wrapped in
 * begin/end markers and capped at 77 positions, matching the usual text
 * encoder limit.
 */

import { PromptError, PromptLengthError } from './errors.js'

export const MAX_TOKENS = 77
export const BOS = '<|startoftext|>'
export const EOS = '<|endoftext|>'

// Small closed vocabulary: function words, common photo-caption nouns, and
// the punctuation the prompt builder emits. Everything else goes through
// the character fallback.
const WORDS = [
  'a', 'an', 'the', 'of', 'on', 'in', 'with', 'and', 'at', 'by', 'next', 'to',
  'photo', 'picture', 'image', 'painting', 'close', 'up', 'view', 'scene',
  'person', 'people', 'man', 'woman', 'child', 'dog', 'cat', 'bird', 'horse',
  'sheep', 'cow', 'car', 'bus', 'train', 'boat', 'bicycle', 'motorbike',
  'aeroplane', 'bottle', 'chair', 'sofa', 'table', 'plant', 'potted', 'tv',
  'monitor', 'screen', 'grass', 'sky', 'road', 'tree', 'building', 'room',
  'field', 'street', 'crate', 'barrel', 'cone',
]
const PUNCT = [';', ',', '.', ':', '!', '?']

export interface Token {
  id: number
  piece: string // display form; '##x' marks a continuation character piece
}

const pieceIds = new Map<string, number>()
function internPiece (piece: string): number {
  let id = pieceIds.get(piece)
  if (id === undefined) {
    id = pieceIds.size
    pieceIds.set(piece, id)
  }
  return id
}

// Fixed id layout: specials, punctuation, vocabulary words, then character
// pieces in first-use order (deterministic for a given input sequence).
internPiece(BOS)
internPiece(EOS)
for (const p of PUNCT) internPiece(p)
for (const w of WORDS) internPiece(w)

const VOCAB = new Set(WORDS)
const PUNCT_SET = new Set(PUNCT)

export function normalize (text: string): string {
  return text.toLowerCase().replace(/\s+/g, ' ').trim()
}

function splitWords (text: string): string[] {
  const out: string[] = []
  for (const chunk of normalize(text).split(' ')) {
    if (!chunk) continue
    // peel punctuation marks into their own pieces
    let word = ''
    for (const ch of chunk) {
      if (PUNCT_SET.has(ch)) {
        if (word) out.push(word)
        out.push(ch)
        word = ''
      } else {
        word += ch
      }
    }
    if (word) out.push(word)
  }
  return out
}

function wordToTokens (word: string): Token[] {
  if (PUNCT_SET.has(word) || VOCAB.has(word)) {
    return [{ id: internPiece(word), piece: word }]
  }
  const chars = [...word]
  return chars.map((ch, i) => {
    const piece = i === 0 ? ch : `##${ch}`
    return { id: internPiece(piece), piece }
  })
}

/** Tokenize plain text (no begin/end markers, no length cap). */
export function encode (text: string): Token[] {
  const tokens: Token[] = []
  for (const word of splitWords(text)) tokens.push(...wordToTokens(word))
  return tokens
}

/** Invert `encode`: join pieces, gluing continuations and punctuation. */
export function decode (tokens: Token[]): string {
  let out = ''
  for (const token of tokens) {
    const piece = token.piece
    if (piece === BOS || piece === EOS) continue
    if (piece.startsWith('##')) {
      out += piece.slice(2)
    } else if (PUNCT_SET.has(piece)) {
      out += piece
    } else {
      out += (out ? ' ' : '') + piece
    }
  }
  return out
}

/** Wrap a token body in markers, enforcing the sequence limit. */
export function finalize (body: Token[], context: string): Token[] {
  const total = body.length + 2
  if (total > MAX_TOKENS) {
    throw new PromptLengthError(
      `${context} tokenizes to ${total} tokens, ${total - MAX_TOKENS} over the ${MAX_TOKENS}-token limit`,
    )
  }
  return [
    { id: internPiece(BOS), piece: BOS },
    ...body,
    { id: internPiece(EOS), piece: EOS },
  ]
}

/** Tokens for one class name; empty names are a caller error. */
export function encodeClassName (name: string): Token[] {
  const tokens = encode(name)
  if (tokens.length === 0) {
    throw new PromptError(`class name ${JSON.stringify(name)} tokenizes to zero tokens`)
  }
  return tokens
}
