import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { RawAudio, TARGET_SAMPLE_RATE, wavBytes } from '../src/audio.js';

export function tempDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

export function tone(freqHz: number, durationS: number, amplitude = 0.5, sampleRate = TARGET_SAMPLE_RATE): RawAudio {
  const n = Math.round(durationS * sampleRate);
  const samples = new Float32Array(n);
  for (let i = 0; i < n; i++) {
    samples[i] = amplitude * Math.sin((2 * Math.PI * freqHz * i) / sampleRate);
  }
  return { samples, sampleRate };
}

export function silence(durationS: number, sampleRate = TARGET_SAMPLE_RATE): RawAudio {
  return { samples: new Float32Array(Math.round(durationS * sampleRate)), sampleRate };
}

export function concat(parts: RawAudio[]): RawAudio {
  const total = parts.reduce((acc, p) => acc + p.samples.length, 0);
  const samples = new Float32Array(total);
  let offset = 0;
  for (const part of parts) {
    samples.set(part.samples, offset);
    offset += part.samples.length;
  }
  return { samples, sampleRate: parts[0].sampleRate };
}

export function writeWavFile(dir: string, name: string, audio: RawAudio): string {
  const path = join(dir, name);
  writeFileSync(path, wavBytes(audio));
  return path;
}
