/**
 * Manifest CSV writer matching the consumer's exact header and value enums.
 */

import { writeFileSync } from 'node:fs';

export const MANIFEST_HEADER = [
  'utterance_id',
  'speaker_id',
  'category',
  'split',
  'intelligibility',
  'imprecise_consonants',
  'harsh_voice',
  'naturalness',
  'monoloudness',
  'monopitch',
  'breathiness',
  'severity',
  'emotion',
  'duration_s',
];

export const CATEGORIES = ['digital_command', 'novel_sentence', 'spontaneous'] as const;
export const SPLITS = ['train', 'validation', 'test'] as const;

export interface ManifestRow {
  utteranceId: string;
  speakerId: string;
  category: (typeof CATEGORIES)[number];
  split: (typeof SPLITS)[number];
  durationS?: number;
}

function csvCell(value: string): string {
  if (/[",\n\r]/.test(value)) {
    return `"${value.replace(/"/g, '""')}"`;
  }
  return value;
}

export function manifestCsv(rows: ManifestRow[]): string {
  const lines = [MANIFEST_HEADER.join(',')];
  for (const row of rows) {
    const cells = [
      csvCell(row.utteranceId),
      csvCell(row.speakerId),
      row.category,
      row.split,
      '', '', '', '', '', '', '', // scores are annotated downstream
      '', // severity
      '', // emotion
      row.durationS === undefined ? '' : String(row.durationS),
    ];
    lines.push(cells.join(','));
  }
  return lines.join('\n') + '\n';
}

export function writeManifest(rows: ManifestRow[], path: string): void {
  writeFileSync(path, manifestCsv(rows), 'utf-8');
}
