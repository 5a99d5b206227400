/**
 * Transcript-guided leading/trailing silence trimming.
 *
 * The bundled aligner is energy based: it finds the span of frames above an
 * adaptive energy threshold and distributes the transcript's words across it
 * proportionally to their length. It stands in for a pretrained forced
 * aligner, which would plug in behind the same WordSpan interface; clips are
 * never emptied (alignment failure falls back to the original audio).
 */

import { RawAudio, durationSeconds } from './audio.js';
import { FRAME_HOP, energyEnvelope } from './dsp.js';

export interface WordSpan {
  word: string;
  startS: number;
  endS: number;
}

export interface TrimResult {
  audio: RawAudio;
  startS: number;
  endS: number;
  applied: boolean;
  warning?: string;
}

const ENERGY_FLOOR = 1e-4;
const RELATIVE_THRESHOLD = 0.1; // fraction of the peak RMS

/** First/last frame above threshold, in seconds; null when all quiet. */
export function detectSpeechSpan(audio: RawAudio): { startS: number; endS: number } | null {
  const envelope = energyEnvelope(audio);
  let peak = 0;
  for (const v of envelope) peak = Math.max(peak, v);
  const threshold = Math.max(ENERGY_FLOOR, peak * RELATIVE_THRESHOLD);
  let first = -1;
  let last = -1;
  for (let f = 0; f < envelope.length; f++) {
    if (envelope[f] >= threshold) {
      if (first < 0) first = f;
      last = f;
    }
  }
  if (first < 0) return null;
  const hopS = FRAME_HOP / audio.sampleRate;
  return { startS: first * hopS, endS: Math.min((last + 1) * hopS + 0.015, durationSeconds(audio)) };
}

/** Word boundaries spread across the detected speech span by word length. */
export function alignWords(audio: RawAudio, transcript: string): WordSpan[] | null {
  const words = transcript.trim().split(/\s+/).filter((w) => w.length > 0);
  if (words.length === 0) return null;
  const span = detectSpeechSpan(audio);
  if (span === null) return null;
  const total = words.reduce((acc, w) => acc + w.length, 0);
  const spans: WordSpan[] = [];
  let cursor = span.startS;
  for (const word of words) {
    const width = ((span.endS - span.startS) * word.length) / total;
    spans.push({ word, startS: cursor, endS: cursor + width });
    cursor += width;
  }
  return spans;
}

/**
 * Crop audio to the first and last aligned word boundaries. Missing
 * transcripts and failed alignments pass the audio through with a warning.
 */
export function trimSilence(audio: RawAudio, transcript?: string): TrimResult {
  const full = { audio, startS: 0, endS: durationSeconds(audio), applied: false };
  if (transcript === undefined || transcript.trim().length === 0) {
    return { ...full, warning: 'no transcript available, audio passed through' };
  }
  const spans = alignWords(audio, transcript);
  if (spans === null) {
    return { ...full, warning: 'alignment failed, audio passed through' };
  }
  const startS = spans[0].startS;
  const endS = spans[spans.length - 1].endS;
  const lo = Math.max(0, Math.floor(startS * audio.sampleRate));
  const hi = Math.min(audio.samples.length, Math.ceil(endS * audio.sampleRate));
  if (hi <= lo) {
    return { ...full, warning: 'alignment produced an empty span, audio passed through' };
  }
  return {
    audio: { samples: audio.samples.slice(lo, hi), sampleRate: audio.sampleRate },
    startS,
    endS,
    applied: true,
  };
}
