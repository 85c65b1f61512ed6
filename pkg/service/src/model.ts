/**
 * Small word-level fusion generator.
 *
 * Each claim+passage context is encoded independently by a shared GRU; the
 * per-context state sequences are concatenated and the GRU decoder attends
 * over all of them at every step, so evidence from any context can shape the
 * joint `label; explanation` output. Sized for desk-scale fine-tuning: a few
 * hundred optimizer steps on double-digit datasets in minutes on a CPU.
 */
import * as tf from '@tensorflow/tfjs'

import { BOS, EOS, Vocab, tokenize } from './tokenizer'

export interface TrainExample {
  contexts: string[]
  target: string
}

export interface TrainConfig {
  steps: number
  warmupSteps: number
  learningRate: number
  weightDecay: number
  gradAccum: number
  maxInputTokens: number
  maxNewTokens: number
  evalEvery: number
}

export interface TrainResult {
  steps: number
  initialLoss: number
  finalLoss: number
  losses: number[]
  checkpoints: { step: number; loss: number }[]
}

function seededUniform(seed: number): () => number {
  let state = seed >>> 0
  return () => {
    state = (state + 0x6d2b79f5) >>> 0
    let t = state
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

/** Decoupled-weight-decay Adam with an external per-step learning rate. */
class AdamW {
  private readonly m = new Map<string, tf.Tensor>()
  private readonly v = new Map<string, tf.Tensor>()
  private t = 0

  constructor(
    private readonly beta1 = 0.9,
    private readonly beta2 = 0.999,
    private readonly eps = 1e-8,
  ) {}

  step(
    variables: Map<string, tf.Variable>,
    grads: Map<string, tf.Tensor>,
    lr: number,
    weightDecay: number,
  ): void {
    this.t += 1
    const bc1 = 1 - Math.pow(this.beta1, this.t)
    const bc2 = 1 - Math.pow(this.beta2, this.t)
    for (const [name, grad] of grads) {
      const variable = variables.get(name)
      if (!variable) continue
      const mPrev = this.m.get(name) ?? tf.keep(tf.zerosLike(variable))
      const vPrev = this.v.get(name) ?? tf.keep(tf.zerosLike(variable))
      const [mNew, vNew] = tf.tidy(() => {
        const mNext = tf.keep(mPrev.mul(this.beta1).add(grad.mul(1 - this.beta1)))
        const vNext = tf.keep(vPrev.mul(this.beta2).add(grad.square().mul(1 - this.beta2)))
        const update = mNext.div(bc1).div(vNext.div(bc2).sqrt().add(this.eps)).mul(lr)
        const decay = variable.mul(lr * weightDecay)
        variable.assign(variable.sub(update).sub(decay))
        return [mNext, vNext]
      })
      mPrev.dispose()
      vPrev.dispose()
      this.m.set(name, mNew)
      this.v.set(name, vNew)
    }
  }

  dispose(): void {
    for (const t of this.m.values()) t.dispose()
    for (const t of this.v.values()) t.dispose()
    this.m.clear()
    this.v.clear()
  }
}

function linearSchedule(step: number, total: number, warmup: number, base: number): number {
  if (step < warmup) return (base * (step + 1)) / Math.max(1, warmup)
  const remaining = Math.max(0, total - step)
  return (base * remaining) / Math.max(1, total - warmup)
}

interface GruParams {
  Wz: tf.Variable
  Uz: tf.Variable
  bz: tf.Variable
  Wr: tf.Variable
  Ur: tf.Variable
  br: tf.Variable
  Wh: tf.Variable
  Uh: tf.Variable
  bh: tf.Variable
}

export class FusionGenerator {
  // tfjs registers variable names globally, so each instance gets a namespace
  private static instances = 0

  readonly vocab: Vocab
  readonly hidden: number
  readonly seed: number
  stepCounter = 0

  private readonly ns = `fg${FusionGenerator.instances++}`
  private readonly vars = new Map<string, tf.Variable>()
  private embed!: tf.Variable
  private enc!: GruParams
  private dec!: GruParams
  private Wc!: tf.Variable
  private Wout!: tf.Variable
  private bout!: tf.Variable

  constructor(vocab: Vocab, hidden = 32, seed = 7) {
    this.vocab = vocab
    this.hidden = hidden
    this.seed = seed
    this.build()
  }

  private variable(name: string, shape: number[], rand: () => number, scale: number): tf.Variable {
    const size = shape.reduce((a, b) => a * b, 1)
    const data = new Float32Array(size)
    for (let i = 0; i < size; i++) data[i] = (rand() * 2 - 1) * scale
    const v = tf.variable(tf.tensor(data, shape), true, `${this.ns}/${name}`)
    this.vars.set(`${this.ns}/${name}`, v)
    return v
  }

  private gru(prefix: string, rand: () => number): GruParams {
    const d = this.hidden
    const scale = 1 / Math.sqrt(d)
    const make = (suffix: string, shape: number[], s: number) =>
      this.variable(`${prefix}_${suffix}`, shape, rand, s)
    return {
      Wz: make('Wz', [d, d], scale), Uz: make('Uz', [d, d], scale), bz: make('bz', [1, d], 0),
      Wr: make('Wr', [d, d], scale), Ur: make('Ur', [d, d], scale), br: make('br', [1, d], 0),
      Wh: make('Wh', [d, d], scale), Uh: make('Uh', [d, d], scale), bh: make('bh', [1, d], 0),
    }
  }

  private build(): void {
    const rand = seededUniform(this.seed)
    const d = this.hidden
    this.embed = this.variable('embed', [this.vocab.size, d], rand, 0.1)
    this.enc = this.gru('enc', rand)
    this.dec = this.gru('dec', rand)
    this.Wc = this.variable('Wc', [2 * d, d], rand, 1 / Math.sqrt(2 * d))
    this.Wout = this.variable('Wout', [d, this.vocab.size], rand, 1 / Math.sqrt(d))
    this.bout = this.variable('bout', [1, this.vocab.size], rand, 0)
  }

  private gruStep(p: GruParams, x: tf.Tensor, h: tf.Tensor): tf.Tensor {
    const z = tf.sigmoid(x.matMul(p.Wz).add(h.matMul(p.Uz)).add(p.bz))
    const r = tf.sigmoid(x.matMul(p.Wr).add(h.matMul(p.Ur)).add(p.br))
    const hTilde = tf.tanh(x.matMul(p.Wh).add(r.mul(h).matMul(p.Uh)).add(p.bh))
    return tf.tidy(() => tf.onesLike(z).sub(z).mul(h).add(z.mul(hTilde)))
  }

  /** Encode one context into its sequence of hidden states (L x d). */
  private encodeContext(ids: number[]): tf.Tensor {
    const x = this.embed.gather(tf.tensor1d(ids, 'int32')) // L x d
    const states: tf.Tensor[] = []
    let h: tf.Tensor = tf.zeros([1, this.hidden])
    for (let t = 0; t < ids.length; t++) {
      h = this.gruStep(this.enc, x.slice([t, 0], [1, this.hidden]), h)
      states.push(h)
    }
    return tf.concat(states, 0)
  }

  /** Encode all contexts independently, concatenated into one memory. */
  private encodeAll(contexts: string[], maxInputTokens: number): tf.Tensor {
    const memories = contexts.map((context) => {
      const tokens = tokenize(context).slice(0, maxInputTokens)
      const ids = tokens.length ? this.vocab.encode(tokens) : [EOS]
      return this.encodeContext(ids)
    })
    return tf.concat(memories, 0)
  }

  private attend(memory: tf.Tensor, h: tf.Tensor): tf.Tensor {
    const scores = memory.matMul(h.transpose()) // L x 1
    const weights = tf.softmax(scores.squeeze([1]))
    return weights.reshape([1, -1]).matMul(memory) // 1 x d
  }

  private decodeLogits(memory: tf.Tensor, targetIds: number[]): tf.Tensor {
    const inputs = [BOS, ...targetIds.slice(0, -1)]
    let h = memory.mean(0, true)
    const logits: tf.Tensor[] = []
    const x = this.embed.gather(tf.tensor1d(inputs, 'int32'))
    for (let t = 0; t < inputs.length; t++) {
      h = this.gruStep(this.dec, x.slice([t, 0], [1, this.hidden]), h)
      const context = this.attend(memory, h)
      const combined = tf.tanh(tf.concat([h, context], 1).matMul(this.Wc))
      logits.push(combined.matMul(this.Wout).add(this.bout))
    }
    return tf.concat(logits, 0) // T x V
  }

  private exampleLoss(example: TrainExample, maxInputTokens: number, maxNewTokens: number): tf.Scalar {
    const targetIds = [
      ...this.vocab.encode(tokenize(example.target).slice(0, maxNewTokens - 1)),
      EOS,
    ]
    const memory = this.encodeAll(example.contexts, maxInputTokens)
    const logits = this.decodeLogits(memory, targetIds)
    const labels = tf.oneHot(tf.tensor1d(targetIds, 'int32'), this.vocab.size)
    return tf.losses.softmaxCrossEntropy(labels, logits).asScalar()
  }

  evalLoss(examples: TrainExample[], config: TrainConfig): number {
    let total = 0
    for (const example of examples) {
      total += tf.tidy(() =>
        this.exampleLoss(example, config.maxInputTokens, config.maxNewTokens).dataSync()[0],
      )
    }
    return total / examples.length
  }

  /** Async so a serving loop stays responsive: yields between steps. */
  async train(
    examples: TrainExample[],
    config: TrainConfig,
    validation: TrainExample[] = [],
  ): Promise<TrainResult> {
    if (!examples.length) throw new Error('no training examples')
    const optimizer = new AdamW()
    const losses: number[] = []
    const checkpoints: { step: number; loss: number }[] = []
    const initialLoss = this.evalLoss(examples, config)

    let cursor = 0
    for (let step = 0; step < config.steps; step++) {
      await new Promise<void>((resolve) => setImmediate(resolve))
      const accumulated = new Map<string, tf.Tensor>()
      let stepLoss = 0
      for (let micro = 0; micro < config.gradAccum; micro++) {
        const example = examples[cursor]
        cursor = (cursor + 1) % examples.length
        const { value, grads } = tf.variableGrads(
          () => this.exampleLoss(example, config.maxInputTokens, config.maxNewTokens),
          [...this.vars.values()],
        )
        stepLoss += value.dataSync()[0]
        value.dispose()
        for (const [name, grad] of Object.entries(grads)) {
          const prev = accumulated.get(name)
          if (prev) {
            const sum = tf.keep(prev.add(grad))
            prev.dispose()
            accumulated.set(name, sum)
          } else {
            accumulated.set(name, tf.keep(grad.clone()))
          }
          grad.dispose()
        }
      }
      const meanGrads = new Map<string, tf.Tensor>()
      for (const [name, sum] of accumulated) {
        meanGrads.set(name, tf.keep(sum.div(config.gradAccum)))
        sum.dispose()
      }
      const lr = linearSchedule(this.stepCounter, config.steps, config.warmupSteps, config.learningRate)
      optimizer.step(this.vars, meanGrads, lr, config.weightDecay)
      for (const t of meanGrads.values()) t.dispose()
      this.stepCounter += 1
      losses.push(stepLoss / config.gradAccum)

      if (config.evalEvery > 0 && this.stepCounter % config.evalEvery === 0) {
        const held = validation.length ? validation : examples
        checkpoints.push({ step: this.stepCounter, loss: this.evalLoss(held, config) })
      }
    }
    optimizer.dispose()
    const finalLoss = this.evalLoss(examples, config)
    return { steps: this.stepCounter, initialLoss, finalLoss, losses, checkpoints }
  }

  /** Greedy decode; deterministic for fixed weights. */
  generate(contexts: string[], maxNewTokens: number, maxInputTokens: number): string {
    if (!contexts.length) throw new Error('at least one context required')
    return tf.tidy(() => {
      const memory = this.encodeAll(contexts, maxInputTokens)
      let h = memory.mean(0, true)
      let prev = BOS
      const out: number[] = []
      for (let t = 0; t < maxNewTokens; t++) {
        const x = this.embed.gather(tf.tensor1d([prev], 'int32'))
        h = this.gruStep(this.dec, x, h)
        const context = this.attend(memory, h)
        const combined = tf.tanh(tf.concat([h, context], 1).matMul(this.Wc))
        const logits = combined.matMul(this.Wout).add(this.bout)
        const next = logits.argMax(1).dataSync()[0]
        if (next === EOS) break
        out.push(next)
        prev = next
      }
      return this.vocab.render(this.vocab.decode(out))
    })
  }

  /** Weight snapshot for checkpoint/resume; step counter included. Weight
   * names are namespace-free so checkpoints move between instances. */
  getState(): { step: number; vocab: string[]; hidden: number; weights: Record<string, number[]> } {
    const weights: Record<string, number[]> = {}
    for (const [name, variable] of this.vars) {
      weights[name.slice(this.ns.length + 1)] = Array.from(variable.dataSync())
    }
    return { step: this.stepCounter, vocab: this.vocab.toJSON(), hidden: this.hidden, weights }
  }

  static fromState(state: ReturnType<FusionGenerator['getState']>, seed = 7): FusionGenerator {
    const model = new FusionGenerator(new Vocab(state.vocab), state.hidden, seed)
    model.stepCounter = state.step
    for (const [name, values] of Object.entries(state.weights)) {
      const variable = model.vars.get(`${model.ns}/${name}`)
      if (!variable) throw new Error(`unknown weight ${name} in checkpoint`)
      variable.assign(tf.tensor(values, variable.shape as number[]))
    }
    return model
  }

  dispose(): void {
    for (const v of this.vars.values()) v.dispose()
  }
}
