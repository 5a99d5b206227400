/**
 * Extraction job runner: audio directory in, VQDE table and manifest CSV out.
 */

import { readFileSync, readdirSync } from 'node:fs';
import { basename, extname, join } from 'node:path';

import { RawAudio, UnreadableAudio, durationSeconds, readAudio } from './audio.js';
import { trimSilence } from './align.js';
import { Pooling, loadFeaturizer, pool } from './featurize.js';
import { CATEGORIES, SPLITS, ManifestRow, writeManifest } from './manifest.js';
import { EmbeddingRow, writeTable } from './vqde.js';

export interface ExtractionJob {
  audioDir: string;
  backend: string;
  outputPath: string;
  manifestPath?: string;
  /** JSON file mapping utterance id (file stem) to transcript text. */
  transcriptPath?: string;
  pooling: Pooling;
  category: (typeof CATEGORIES)[number];
  split: (typeof SPLITS)[number];
  /** Stored in the table header; defaults to the backend id. */
  label?: string;
}

export interface ExtractionSummary {
  outputPath: string;
  manifestPath?: string;
  written: number;
  skipped: { id: string; reason: string }[];
  warnings: string[];
}

const AUDIO_EXTENSIONS = new Set(['.wav', '.flac']);

export function listAudioFiles(audioDir: string): string[] {
  return readdirSync(audioDir)
    .filter((name) => AUDIO_EXTENSIONS.has(extname(name).toLowerCase()))
    .sort();
}

function loadTranscripts(path?: string): Record<string, string> {
  if (!path) return {};
  const doc = JSON.parse(readFileSync(path, 'utf-8'));
  if (typeof doc !== 'object' || doc === null || Array.isArray(doc)) {
    throw new Error(`transcript table must be a JSON object of id -> text: ${path}`);
  }
  return doc as Record<string, string>;
}

function speakerOf(stem: string): string {
  const cut = stem.indexOf('_');
  return cut > 0 ? stem.slice(0, cut) : stem;
}

export async function runExtraction(job: ExtractionJob): Promise<ExtractionSummary> {
  const featurizer = loadFeaturizer(job.backend);
  const transcripts = loadTranscripts(job.transcriptPath);
  const files = listAudioFiles(job.audioDir);

  const rows: EmbeddingRow[] = [];
  const manifestRows: ManifestRow[] = [];
  const skipped: { id: string; reason: string }[] = [];
  const warnings: string[] = [];

  for (const file of files) {
    const stem = basename(file, extname(file));
    let audio: RawAudio;
    try {
      audio = await readAudio(join(job.audioDir, file));
    } catch (err) {
      const reason = err instanceof UnreadableAudio ? err.message : String(err);
      skipped.push({ id: stem, reason });
      console.error(`warn: skipping ${file}: ${reason}`);
      continue;
    }
    const trimmed = trimSilence(audio, transcripts[stem]);
    if (trimmed.warning) warnings.push(`${stem}: ${trimmed.warning}`);
    const vector = pool(featurizer.frameVectors(trimmed.audio), job.pooling);
    rows.push({ id: stem, vector });
    manifestRows.push({
      utteranceId: stem,
      speakerId: speakerOf(stem),
      category: job.category,
      split: job.split,
      durationS: durationSeconds(trimmed.audio),
    });
  }

  writeTable({ backendName: job.label ?? job.backend, dim: featurizer.dim, rows }, job.outputPath);
  if (job.manifestPath) writeManifest(manifestRows, job.manifestPath);
  return {
    outputPath: job.outputPath,
    manifestPath: job.manifestPath,
    written: rows.length,
    skipped,
    warnings,
  };
}
