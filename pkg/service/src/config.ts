/**
 * Service configuration. The reference preset carries the full-scale training
 * budgets (per-dataset step/warmup schedules); the toy preset is what CI and
 * desk runs use, sized to fine-tune in minutes on a CPU.
 */
import type { TrainConfig } from './model'

export interface ServiceConfig {
  modelId: string
  embeddingDim: number
  hidden: number
  seed: number
  maxInputTokens: number
  maxNewTokens: number
  train: TrainConfig
  /** Per-dataset step/warmup budgets for full-scale runs. */
  schedules: Record<string, { steps: number; warmupSteps: number }>
}

const REFERENCE_SCHEDULES = {
  fev2: { steps: 10_000, warmupSteps: 800 },
  fev3: { steps: 18_000, warmupSteps: 1_000 },
  feedback: { steps: 7_500, warmupSteps: 800 },
}

export const REFERENCE_CONFIG: ServiceConfig = {
  modelId: 'fusion-seq2seq-reference',
  embeddingDim: 128,
  hidden: 256,
  seed: 7,
  maxInputTokens: 200,
  maxNewTokens: 150,
  train: {
    steps: 10_000,
    warmupSteps: 800,
    learningRate: 1e-5,
    weightDecay: 0.01,
    gradAccum: 4, // batch size 1 with gradient accumulation
    maxInputTokens: 200,
    maxNewTokens: 150,
    evalEvery: 2_500,
  },
  schedules: REFERENCE_SCHEDULES,
}

export const TOY_CONFIG: ServiceConfig = {
  modelId: 'fusion-seq2seq-toy',
  embeddingDim: 64,
  hidden: 32,
  seed: 7,
  maxInputTokens: 64,
  maxNewTokens: 60,
  train: {
    steps: 200,
    warmupSteps: 20,
    learningRate: 5e-3,
    weightDecay: 0.01,
    gradAccum: 2,
    maxInputTokens: 64,
    maxNewTokens: 60,
    evalEvery: 100,
  },
  schedules: REFERENCE_SCHEDULES,
}

export function resolveConfig(name: string | undefined): ServiceConfig {
  if (!name || name === 'toy') return TOY_CONFIG
  if (name === 'reference') return REFERENCE_CONFIG
  throw new Error(`unknown config preset '${name}' (expected toy or reference)`)
}
