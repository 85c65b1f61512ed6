/**
 * Protocol conformance: replays the request/response suite recorded from the
 * Python-side clients against a live service instance, in order, validating
 * status codes and response field types for all five endpoints (+ health).
 */
import * as fs from 'fs'
import * as path from 'path'
import type { Server } from 'http'

import { afterAll, beforeAll, describe, expect, it } from 'vitest'

import { TOY_CONFIG } from '../src/config'
import { createApp, createState } from '../src/server'

interface SuiteEntry {
  name: string
  method: string
  path: string
  body: unknown
  expect: { status: number; fields: [string, string][] }
}

const suitePath = path.join(__dirname, '..', 'fixtures', 'recorded_requests.json')
const suite: SuiteEntry[] = JSON.parse(fs.readFileSync(suitePath, 'utf-8')).suite

let server: Server
let base: string

beforeAll(async () => {
  const state = createState({ ...TOY_CONFIG, hidden: 16 })
  server = createApp(state).listen(0, '127.0.0.1')
  await new Promise<void>((resolve) => server.once('listening', resolve))
  const address = server.address()
  if (typeof address === 'object' && address) base = `http://127.0.0.1:${address.port}`
})

afterAll(() => {
  server?.close()
})

function typeOf(value: unknown): string {
  if (Array.isArray(value)) return 'array'
  return typeof value
}

describe('recorded request/response suite', () => {
  // entries depend on earlier ones (train before classify), so replay in order
  it('replays every recorded entry in order', async () => {
    expect(suite.length).toBeGreaterThanOrEqual(9)
    for (const entry of suite) {
      const response = await fetch(base + entry.path, {
        method: entry.method,
        headers: entry.body === null ? {} : { 'content-type': 'application/json' },
        body: entry.body === null ? undefined : JSON.stringify(entry.body),
      })
      expect(response.status, `${entry.name}: status`).toBe(entry.expect.status)
      const payload = await response.json()
      for (const [field, expected] of entry.expect.fields) {
        expect(typeOf(payload[field]), `${entry.name}: field ${field}`).toBe(expected)
      }
    }
  }, 120_000)

  it('covers all five endpoints', () => {
    const paths = new Set(suite.map((entry) => entry.path))
    for (const endpoint of ['/generate', '/encode', '/encode_tokens', '/train', '/classify']) {
      expect(paths.has(endpoint), endpoint).toBe(true)
    }
  })
})

describe('endpoint details beyond the recorded suite', () => {
  it('encode returns one row per text with the declared dim', async () => {
    const response = await fetch(`${base}/encode`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ texts: ['one text', 'another text'] }),
    })
    const payload = await response.json()
    expect(payload.vectors).toHaveLength(2)
    for (const row of payload.vectors) expect(row).toHaveLength(payload.dim)
  })

  it('encode can answer in the binary embedding-record format', async () => {
    const response = await fetch(`${base}/encode`, {
      method: 'POST',
      headers: {
        'content-type': 'application/json',
        accept: 'application/octet-stream',
      },
      body: JSON.stringify({ texts: ['alpha', 'beta'], ids: [3, 4] }),
    })
    expect(response.status).toBe(200)
    const buffer = Buffer.from(await response.arrayBuffer())
    expect(buffer.subarray(0, 8).toString('ascii')).toBe('PSGEMB01')
    expect(buffer.readBigUInt64LE(12)).toBe(2n)
  })

  it('same encode request twice is byte-identical', async () => {
    const ask = () =>
      fetch(`${base}/encode`, {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify({ texts: ['determinism check'] }),
      }).then((r) => r.text())
    expect(await ask()).toBe(await ask())
  })

  it('generate output token count respects max_new_tokens', async () => {
    const response = await fetch(`${base}/generate`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({
        claim_id: 'len-check',
        contexts: ['lab-exp: claim: short claim context: some evidence'],
        max_new_tokens: 5,
      }),
    })
    const { raw } = await response.json()
    expect(raw.split(/\s+/).filter(Boolean).length).toBeLessThanOrEqual(5)
  })

  it('generate is deterministic for a fixed model', async () => {
    const body = JSON.stringify({
      claim_id: 'det',
      contexts: ['lab-exp: claim: oceans acidify context: ph falls'],
      max_new_tokens: 20,
    })
    const ask = () =>
      fetch(`${base}/generate`, {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body,
      }).then((r) => r.json())
    expect((await ask()).raw).toBe((await ask()).raw)
  })

  it('rejects more than 20 contexts', async () => {
    const response = await fetch(`${base}/generate`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({
        claim_id: 'too-many',
        contexts: Array.from({ length: 21 }, (_, i) => `lab-exp: claim: c context: p${i}`),
      }),
    })
    expect(response.status).toBe(400)
  })

  it('k=1 degenerates to plain seq2seq generation', async () => {
    const response = await fetch(`${base}/generate`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ claim_id: 'k1', contexts: ['lab-exp: claim: only one'] }),
    })
    expect(response.status).toBe(200)
    expect(typeof (await response.json()).raw).toBe('string')
  })

  it('concurrent training job is rejected with 409', async () => {
    const records = fs
      .readFileSync(path.join(__dirname, '..', 'fixtures', 'protocol_train_records.jsonl'), 'utf-8')
      .split('\n')
      .filter(Boolean)
      .map((line) => JSON.parse(line))
    const body = (steps: number) =>
      JSON.stringify({ task: 'generate', records, config: { steps, evalEvery: 0 } })
    const slow = fetch(`${base}/train`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: body(40),
    })
    await new Promise((resolve) => setTimeout(resolve, 150))
    const second = await fetch(`${base}/train`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: body(5),
    })
    expect(second.status).toBe(409)
    const generateDuringTraining = await fetch(`${base}/generate`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ claim_id: 'busy', contexts: ['lab-exp: claim: x'] }),
    })
    expect(generateDuringTraining.status).toBe(503)
    expect((await generateDuringTraining.json()).retry).toBe(true)
    expect((await slow).status).toBe(200)
  }, 120_000)
})
