/**
 * Claim-record JSONL: the file schema the data pipeline emits
 * (claim_id, text, label, references[], evidence[]).
 */
import * as fs from 'fs'

import { z } from 'zod'

import type { TrainExample } from './model'
import type { ClassifierExample } from './classifier'

export const claimRecordSchema = z.object({
  claim_id: z.string(),
  text: z.string(),
  label: z.string(),
  references: z.array(z.string()).min(1),
  evidence: z
    .array(z.object({ text: z.string(), label: z.string() }))
    .optional(),
})

export type ClaimRecord = z.infer<typeof claimRecordSchema>

export function parseRecords(lines: string[]): ClaimRecord[] {
  return lines
    .map((line, i) => ({ line, i }))
    .filter(({ line }) => line.trim().length > 0)
    .map(({ line, i }) => {
      const parsed = claimRecordSchema.safeParse(JSON.parse(line))
      if (!parsed.success) {
        throw new Error(`record ${i}: ${parsed.error.issues[0]?.message ?? 'invalid'}`)
      }
      return parsed.data
    })
}

export function readRecordsFile(path: string): ClaimRecord[] {
  return parseRecords(fs.readFileSync(path, 'utf-8').split('\n'))
}

/** Joint-output target text: the label reads back through the output parser. */
export function targetText(record: ClaimRecord, reference: string): string {
  return `${record.label.toLowerCase().replace(/_/g, ' ')}; ${reference}`
}

/** One generation example per reference: claim+reference context, joint target. */
export function generationExamples(records: ClaimRecord[]): TrainExample[] {
  const examples: TrainExample[] = []
  for (const record of records) {
    for (const reference of record.references) {
      examples.push({
        contexts: [`lab-exp: claim: ${record.text} context: ${reference}`],
        target: targetText(record, reference),
      })
    }
  }
  return examples
}

export function classifierExamples(records: ClaimRecord[]): ClassifierExample[] {
  return records.map((record) => ({
    claim: record.text,
    explanation: record.references[0],
    label: record.label,
  }))
}
