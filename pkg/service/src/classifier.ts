/**
 * Veracity-only baseline: softmax regression over claim+explanation word
 * counts. No retrieval, no generation; it answers with one label from the
 * training set's label inventory. Deterministic: plain loops, fixed
 * iteration order, no RNG.
 */
import { tokenize } from './tokenizer'

export interface ClassifierExample {
  claim: string
  explanation: string
  label: string
}

export class VeracityClassifier {
  private featureIndex = new Map<string, number>()
  labels: string[] = []
  private weights: Float64Array = new Float64Array(0) // (features+1) x labels
  trained = false

  private features(claim: string, explanation: string): Map<number, number> {
    const counts = new Map<number, number>()
    for (const token of tokenize(`${claim} ${explanation}`)) {
      const index = this.featureIndex.get(token)
      if (index !== undefined) counts.set(index, (counts.get(index) ?? 0) + 1)
    }
    return counts
  }

  private scores(counts: Map<number, number>): number[] {
    const nLabels = this.labels.length
    const bias = this.featureIndex.size
    const out = new Array(nLabels).fill(0)
    for (let l = 0; l < nLabels; l++) out[l] = this.weights[bias * nLabels + l]
    for (const [index, count] of counts) {
      for (let l = 0; l < nLabels; l++) out[l] += count * this.weights[index * nLabels + l]
    }
    return out
  }

  train(examples: ClassifierExample[], steps = 300, lr = 0.1): { initialLoss: number; finalLoss: number } {
    if (!examples.length) throw new Error('no classifier examples')
    this.featureIndex = new Map()
    const labelSet = new Map<string, number>()
    for (const example of examples) {
      for (const token of tokenize(`${example.claim} ${example.explanation}`)) {
        if (!this.featureIndex.has(token)) this.featureIndex.set(token, this.featureIndex.size)
      }
      if (!labelSet.has(example.label)) labelSet.set(example.label, labelSet.size)
    }
    this.labels = [...labelSet.keys()]
    const nLabels = this.labels.length
    this.weights = new Float64Array((this.featureIndex.size + 1) * nLabels)

    const rows = examples.map((e) => ({
      counts: this.features(e.claim, e.explanation),
      label: labelSet.get(e.label)!,
    }))

    const epochLoss = () => {
      let loss = 0
      for (const row of rows) {
        const s = this.scores(row.counts)
        const max = Math.max(...s)
        const logZ = max + Math.log(s.reduce((acc, x) => acc + Math.exp(x - max), 0))
        loss += logZ - s[row.label]
      }
      return loss / rows.length
    }

    const initialLoss = epochLoss()
    const bias = this.featureIndex.size
    for (let step = 0; step < steps; step++) {
      const row = rows[step % rows.length]
      const s = this.scores(row.counts)
      const max = Math.max(...s)
      const exps = s.map((x) => Math.exp(x - max))
      const z = exps.reduce((a, b) => a + b, 0)
      for (let l = 0; l < nLabels; l++) {
        const grad = exps[l] / z - (l === row.label ? 1 : 0)
        this.weights[bias * nLabels + l] -= lr * grad
        for (const [index, count] of row.counts) {
          this.weights[index * nLabels + l] -= lr * grad * count
        }
      }
    }
    this.trained = true
    return { initialLoss, finalLoss: epochLoss() }
  }

  predict(claim: string, explanation: string): string {
    if (!this.trained) throw new Error('classifier not trained')
    const s = this.scores(this.features(claim, explanation))
    let best = 0
    for (let l = 1; l < s.length; l++) if (s[l] > s[best]) best = l
    return this.labels[best]
  }
}
