/**
 * Entry point: `node dist/main.js [--port N] [--config toy|reference]
 * [--train records.jsonl]`. With --train, the generator (and classifier)
 * fine-tune on the given claim-record JSONL before the server starts
 * accepting requests.
 */
import { resolveConfig } from './config'
import { classifierExamples, generationExamples, readRecordsFile } from './records'
import { FusionGenerator } from './model'
import { Vocab } from './tokenizer'
import { createApp, createState } from './server'

function argValue(name: string): string | undefined {
  const index = process.argv.indexOf(name)
  return index >= 0 ? process.argv[index + 1] : undefined
}

async function main(): Promise<void> {
  const config = resolveConfig(argValue('--config'))
  const state = createState(config)

  const trainPath = argValue('--train')
  if (trainPath) {
    const records = readRecordsFile(trainPath)
    const examples = generationExamples(records)
    const texts = examples.flatMap((e) => [...e.contexts, e.target])
    const vocab = Vocab.fromTexts(texts)
    state.generator.dispose()
    state.generator = new FusionGenerator(vocab, config.hidden, config.seed)
    console.log(`training on ${records.length} records (${config.train.steps} steps)...`)
    const result = await state.generator.train(examples, config.train)
    state.trainedSteps = result.steps
    console.log(
      `trained: loss ${result.initialLoss.toFixed(3)} -> ${result.finalLoss.toFixed(3)}`,
    )
    state.classifier.train(classifierExamples(records))
  }

  const port = Number(argValue('--port') ?? 8642)
  const server = createApp(state).listen(port, '127.0.0.1', () => {
    const address = server.address()
    const bound = typeof address === 'object' && address ? address.port : port
    console.log(`listening on http://127.0.0.1:${bound}`)
  })
}

main().catch((err) => {
  console.error(err)
  process.exit(1)
})
