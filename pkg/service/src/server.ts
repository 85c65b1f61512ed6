/**
 * HTTP surface of the generation service.
 *
 * JSON endpoints: /generate, /encode, /encode_tokens, /train, /classify,
 * /health. One model instance; at most one training job at a time, with
 * generation rejected (503 + retry flag) while training runs.
 */
import express from 'express'
import { z } from 'zod'

import { VeracityClassifier } from './classifier'
import type { ServiceConfig } from './config'
import { embeddingFileBuffer, encodeTokens, textVector } from './embeddings'
import { FusionGenerator, TrainConfig } from './model'
import {
  claimRecordSchema,
  classifierExamples,
  generationExamples,
  readRecordsFile,
} from './records'
import { Vocab } from './tokenizer'

const BASE_VOCAB = [
  'supports', 'refutes', 'not', 'enough', 'info', ';',
  'lab-exp:', 'claim:', 'context:',
]

export interface ServiceState {
  config: ServiceConfig
  generator: FusionGenerator
  classifier: VeracityClassifier
  training: boolean
  trainedSteps: number
}

export function createState(config: ServiceConfig): ServiceState {
  return {
    config,
    generator: new FusionGenerator(new Vocab(BASE_VOCAB), config.hidden, config.seed),
    classifier: new VeracityClassifier(),
    training: false,
    trainedSteps: 0,
  }
}

const MAX_CONTEXTS = 20

const generateSchema = z.object({
  claim_id: z.string().optional(),
  contexts: z.array(z.string()).max(MAX_CONTEXTS),
  max_new_tokens: z.number().int().positive().optional(),
})

const encodeSchema = z.object({
  texts: z.array(z.string()).min(1),
  ids: z.array(z.number().int().nonnegative()).optional(),
})

const trainSchema = z.object({
  task: z.enum(['generate', 'classify']).default('generate'),
  records: z.array(claimRecordSchema).optional(),
  validation_records: z.array(claimRecordSchema).optional(),
  dataset_path: z.string().optional(),
  dataset: z.enum(['fev2', 'fev3', 'feedback']).optional(),
  config: z
    .object({
      steps: z.number().int().positive().optional(),
      warmupSteps: z.number().int().nonnegative().optional(),
      learningRate: z.number().positive().optional(),
      weightDecay: z.number().nonnegative().optional(),
      gradAccum: z.number().int().positive().optional(),
      evalEvery: z.number().int().nonnegative().optional(),
    })
    .optional(),
})

const classifySchema = z.object({
  claim: z.string(),
  explanation: z.string().min(1, 'explanation required'),
})

/** Yield to the event loop so health/reject responses flow during training. */
const breathe = () => new Promise<void>((resolve) => setImmediate(resolve))

export function createApp(state: ServiceState): express.Express {
  const app = express()
  app.use(express.json({ limit: '20mb' }))

  app.get('/health', (_req, res) => {
    res.json({
      status: 'ok',
      model: state.config.modelId,
      dim: state.config.embeddingDim,
      trained_steps: state.trainedSteps,
      training: state.training,
      classifier_trained: state.classifier.trained,
    })
  })

  app.post('/generate', (req, res) => {
    if (state.training) {
      res.status(503).json({ error: 'training in progress', retry: true })
      return
    }
    const parsed = generateSchema.safeParse(req.body)
    if (!parsed.success || parsed.data.contexts.length === 0) {
      res.status(400).json({ error: 'contexts must be a non-empty string array' })
      return
    }
    const maxNew = Math.min(
      parsed.data.max_new_tokens ?? state.config.maxNewTokens,
      state.config.maxNewTokens,
    )
    const raw = state.generator.generate(
      parsed.data.contexts,
      maxNew,
      state.config.maxInputTokens,
    )
    res.json({ raw })
  })

  app.post('/encode', (req, res) => {
    const parsed = encodeSchema.safeParse(req.body)
    if (!parsed.success) {
      res.status(400).json({ error: parsed.error.issues[0]?.message ?? 'bad request' })
      return
    }
    const dim = state.config.embeddingDim
    const vectors = parsed.data.texts.map((text) => textVector(text, dim))
    const wantsBinary = (req.headers.accept ?? '').includes('application/octet-stream')
    if (wantsBinary) {
      const ids = parsed.data.ids ?? parsed.data.texts.map((_, i) => i)
      if (ids.length !== vectors.length) {
        res.status(400).json({ error: 'ids must match texts 1:1' })
        return
      }
      res.type('application/octet-stream')
      res.send(embeddingFileBuffer(ids, vectors, dim))
      return
    }
    res.json({ dim, vectors: vectors.map((v) => Array.from(v)) })
  })

  app.post('/encode_tokens', (req, res) => {
    const parsed = encodeSchema.safeParse(req.body)
    if (!parsed.success) {
      res.status(400).json({ error: parsed.error.issues[0]?.message ?? 'bad request' })
      return
    }
    const dim = state.config.embeddingDim
    res.json({
      dim,
      results: parsed.data.texts.map((text) => encodeTokens(text, dim)),
    })
  })

  app.post('/train', async (req, res) => {
    if (state.training) {
      res.status(409).json({ error: 'a training job is already running' })
      return
    }
    const parsed = trainSchema.safeParse(req.body)
    if (!parsed.success) {
      res.status(400).json({ error: parsed.error.issues[0]?.message ?? 'bad request' })
      return
    }
    const body = parsed.data
    let records
    try {
      records = body.records ?? (body.dataset_path ? readRecordsFile(body.dataset_path) : [])
    } catch (err) {
      res.status(400).json({ error: String(err) })
      return
    }
    if (!records.length) {
      res.status(400).json({ error: 'no training records (records or dataset_path)' })
      return
    }

    if (body.task === 'classify') {
      const result = state.classifier.train(classifierExamples(records))
      res.json({ task: 'classify', labels: state.classifier.labels, ...result })
      return
    }

    const schedule = body.dataset ? state.config.schedules[body.dataset] : undefined
    const trainConfig: TrainConfig = {
      ...state.config.train,
      ...(schedule ?? {}),
      ...(body.config ?? {}),
    }
    state.training = true
    try {
      const examples = generationExamples(records)
      const texts = examples.flatMap((e) => [...e.contexts, e.target])
      const vocab = Vocab.fromTexts([...BASE_VOCAB, ...texts])
      state.generator.dispose()
      state.generator = new FusionGenerator(vocab, state.config.hidden, state.config.seed)
      await breathe()
      const validation = body.validation_records
        ? generationExamples(body.validation_records)
        : []
      const result = await state.generator.train(examples, trainConfig, validation)
      state.trainedSteps = result.steps
      res.json({
        task: 'generate',
        steps: result.steps,
        initial_loss: result.initialLoss,
        final_loss: result.finalLoss,
        checkpoints: result.checkpoints,
      })
    } finally {
      state.training = false
    }
  })

  app.post('/classify', (req, res) => {
    const parsed = classifySchema.safeParse(req.body)
    if (!parsed.success) {
      res.status(400).json({ error: parsed.error.issues[0]?.message ?? 'bad request' })
      return
    }
    if (!state.classifier.trained) {
      res.status(409).json({ error: 'classifier not trained; POST /train with task=classify' })
      return
    }
    res.json({ label: state.classifier.predict(parsed.data.claim, parsed.data.explanation) })
  })

  return app
}
