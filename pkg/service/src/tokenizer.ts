/**
 * Word-level tokenizer and vocabulary shared by the generator and classifier.
 *
 * The task markers (lab-exp:, claim:, context:) survive as single tokens and
 * the semicolon is its own token so the joint `label; explanation` output
 * format round-trips through decoding.
 */

const TOKEN_RE = /lab-exp:|claim:|context:|[a-z0-9]+|;/g

export function tokenize(text: string): string[] {
  return text.toLowerCase().match(TOKEN_RE) ?? []
}

export const PAD = 0
export const BOS = 1
export const EOS = 2
export const UNK = 3
const SPECIALS = ['<pad>', '<s>', '</s>', '<unk>']

export class Vocab {
  readonly tokens: string[]
  private readonly index: Map<string, number>

  constructor(tokens: string[]) {
    this.tokens = [...SPECIALS, ...tokens]
    this.index = new Map(this.tokens.map((t, i) => [t, i]))
  }

  /** Build from raw texts, most frequent tokens first (ties alphabetical). */
  static fromTexts(texts: string[], maxSize = 4000): Vocab {
    const counts = new Map<string, number>()
    for (const text of texts) {
      for (const token of tokenize(text)) {
        counts.set(token, (counts.get(token) ?? 0) + 1)
      }
    }
    const ranked = [...counts.entries()]
      .sort((a, b) => b[1] - a[1] || (a[0] < b[0] ? -1 : 1))
      .slice(0, Math.max(0, maxSize - SPECIALS.length))
      .map(([token]) => token)
    return new Vocab(ranked)
  }

  get size(): number {
    return this.tokens.length
  }

  encode(tokens: string[]): number[] {
    return tokens.map((t) => this.index.get(t) ?? UNK)
  }

  decode(ids: number[]): string[] {
    return ids
      .filter((id) => id > UNK || id === UNK)
      .map((id) => this.tokens[id] ?? '<unk>')
  }

  /** Render decoded tokens as text; the semicolon attaches to its left. */
  render(tokens: string[]): string {
    let out = ''
    for (const token of tokens) {
      if (token === ';') out += ';'
      else out += (out ? ' ' : '') + token
    }
    return out
  }

  toJSON(): string[] {
    return this.tokens.slice(SPECIALS.length)
  }
}
