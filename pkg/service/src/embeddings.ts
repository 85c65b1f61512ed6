/**
 * Deterministic text and token embeddings.
 *
 * Every token hashes to a fixed pseudo-random unit direction, so texts that
 * share words land closer in cosine space and reruns are bit-identical. Text
 * vectors are the normalized sum of their token vectors. Passage batches can
 * be serialized to the binary embedding-record format consumed by the dense
 * indexer (magic PSGEMB01, u32 dim, u64 count, then u64 id + dim float32 LE).
 */
import { tokenize } from './tokenizer'

function fnv1a(text: string): number {
  let hash = 0x811c9dc5
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i)
    hash = Math.imul(hash, 0x01000193)
  }
  return hash >>> 0
}

function mulberry32(seed: number): () => number {
  let state = seed >>> 0
  return () => {
    state = (state + 0x6d2b79f5) >>> 0
    let t = state
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

function l2normalize(v: Float32Array): Float32Array {
  let norm = 0
  for (const x of v) norm += x * x
  norm = Math.sqrt(norm)
  if (norm > 0) for (let i = 0; i < v.length; i++) v[i] /= norm
  return v
}

export function tokenVector(token: string, dim: number): Float32Array {
  const rand = mulberry32(fnv1a(token))
  const v = new Float32Array(dim)
  // sum of uniforms approximates a gaussian; exact distribution is irrelevant,
  // stability is what matters
  for (let i = 0; i < dim; i++) {
    v[i] = rand() + rand() + rand() + rand() - 2
  }
  return l2normalize(v)
}

export function textVector(text: string, dim: number): Float32Array {
  const v = new Float32Array(dim)
  const tokens = tokenize(text)
  if (tokens.length === 0) {
    v[0] = 1 // fixed direction for empty text
    return v
  }
  for (const token of tokens) {
    const tv = tokenVector(token, dim)
    for (let i = 0; i < dim; i++) v[i] += tv[i]
  }
  return l2normalize(v)
}

export function encodeTokens(text: string, dim: number): { tokens: string[]; vectors: number[][] } {
  const tokens = tokenize(text)
  return {
    tokens,
    vectors: tokens.map((t) => Array.from(tokenVector(t, dim))),
  }
}

export function cosine(a: Float32Array, b: Float32Array): number {
  let dot = 0
  for (let i = 0; i < a.length; i++) dot += a[i] * b[i]
  return dot
}

const EMBEDDING_MAGIC = 'PSGEMB01'

export function embeddingFileBuffer(ids: number[], vectors: Float32Array[], dim: number): Buffer {
  if (ids.length !== vectors.length) throw new Error('one id per vector required')
  const header = Buffer.alloc(8 + 4 + 8)
  header.write(EMBEDDING_MAGIC, 0, 'ascii')
  header.writeUInt32LE(dim, 8)
  header.writeBigUInt64LE(BigInt(ids.length), 12)
  const records: Buffer[] = [header]
  for (let row = 0; row < ids.length; row++) {
    const record = Buffer.alloc(8 + 4 * dim)
    record.writeBigUInt64LE(BigInt(ids[row]), 0)
    for (let i = 0; i < dim; i++) record.writeFloatLE(vectors[row][i], 8 + 4 * i)
    records.push(record)
  }
  return Buffer.concat(records)
}
