/**
 * Toy fine-tune acceptance: 200 optimizer steps on the 90-record training
 * split must reduce the training loss, and at least 95% of the outputs
 * generated for the held-out claims must parse as `label; explanation`.
 */
import * as fs from 'fs'
import * as path from 'path'

import { beforeAll, describe, expect, it } from 'vitest'

import { TOY_CONFIG } from '../src/config'
import { FusionGenerator, TrainResult } from '../src/model'
import { generationExamples, readRecordsFile } from '../src/records'
import { Vocab } from '../src/tokenizer'

const fixtures = path.join(__dirname, '..', 'fixtures')
const LABELS = new Set(['supports', 'refutes', 'not enough info'])

/** Mirrors the consumer-side parser: split at the first semicolon, match the
 * head case-insensitively against the known labels. */
function parses(raw: string): boolean {
  const semicolon = raw.indexOf(';')
  if (semicolon < 0) return false
  const head = raw.slice(0, semicolon).trim().toLowerCase().replace(/[_-]/g, ' ')
  return LABELS.has(head)
}

let model: FusionGenerator
let result: TrainResult

beforeAll(async () => {
  const records = readRecordsFile(path.join(fixtures, 'feedback_train_90.jsonl'))
  expect(records).toHaveLength(90)
  const examples = generationExamples(records)
  const vocab = Vocab.fromTexts(examples.flatMap((e) => [...e.contexts, e.target]))
  model = new FusionGenerator(vocab, TOY_CONFIG.hidden, TOY_CONFIG.seed)
  result = await model.train(examples, TOY_CONFIG.train)
}, 600_000)

describe('toy fine-tune on the 90-record split', () => {
  it('runs the configured 200 steps', () => {
    expect(result.steps).toBe(200)
  })

  it('final training loss is below the initial loss', () => {
    expect(result.finalLoss).toBeLessThan(result.initialLoss)
  })

  it('records periodic evaluation checkpoints', () => {
    expect(result.checkpoints.map((c) => c.step)).toEqual([100, 200])
  })

  it('>= 95% of generated outputs parse as label; explanation', () => {
    const test = readRecordsFile(path.join(fixtures, 'feedback_test_25.jsonl'))
    expect(test).toHaveLength(25)
    // stand-in retrieved passage: another record's reference text
    const outputs = test.map((record, i) =>
      model.generate(
        [`lab-exp: claim: ${record.text} context: ${test[(i + 1) % test.length].references[0]}`],
        TOY_CONFIG.maxNewTokens,
        TOY_CONFIG.maxInputTokens,
      ),
    )
    const parsed = outputs.filter(parses).length
    expect(parsed / outputs.length, `outputs: ${JSON.stringify(outputs.slice(0, 3))}`)
      .toBeGreaterThanOrEqual(0.95)
  }, 120_000)

  it('checkpoint restore reproduces the step counter and outputs', () => {
    const state = model.getState()
    const restored = FusionGenerator.fromState(state, TOY_CONFIG.seed)
    expect(restored.stepCounter).toBe(model.stepCounter)
    const contexts = ['lab-exp: claim: sea level rise is decelerating context: oceans']
    expect(restored.generate(contexts, 30, 64)).toBe(model.generate(contexts, 30, 64))
    restored.dispose()
  })
})
