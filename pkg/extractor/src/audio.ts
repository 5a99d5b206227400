/**
 * Audio ingestion: WAV (16-bit PCM and float32) and FLAC reading, mono
 * downmix, and linear resampling to the 16 kHz pipeline rate.
 */

import { readFileSync } from 'node:fs';
import { extname } from 'node:path';

export const TARGET_SAMPLE_RATE = 16000;

export interface RawAudio {
  samples: Float32Array;
  sampleRate: number;
}

export class UnreadableAudio extends Error {
  constructor(public readonly path: string, reason: string) {
    super(`unreadable audio ${path}: ${reason}`);
  }
}

export function durationSeconds(audio: RawAudio): number {
  return audio.samples.length / audio.sampleRate;
}

function downmix(channels: Float32Array[]): Float32Array {
  if (channels.length === 1) return channels[0];
  const n = channels[0].length;
  const mono = new Float32Array(n);
  for (let i = 0; i < n; i++) {
    let sum = 0;
    for (const ch of channels) sum += ch[i];
    mono[i] = sum / channels.length;
  }
  return mono;
}

/** Linear-interpolation resampler; adequate for feature extraction. */
export function resampleLinear(audio: RawAudio, targetRate: number): RawAudio {
  if (audio.sampleRate === targetRate) return audio;
  const ratio = audio.sampleRate / targetRate;
  const outLength = Math.max(1, Math.round(audio.samples.length / ratio));
  const out = new Float32Array(outLength);
  for (let i = 0; i < outLength; i++) {
    const pos = i * ratio;
    const lo = Math.floor(pos);
    const hi = Math.min(lo + 1, audio.samples.length - 1);
    const frac = pos - lo;
    out[i] = audio.samples[lo] * (1 - frac) + audio.samples[hi] * frac;
  }
  return { samples: out, sampleRate: targetRate };
}

export function readWav(path: string): RawAudio {
  let buf: Buffer;
  try {
    buf = readFileSync(path);
  } catch (err) {
    throw new UnreadableAudio(path, String(err));
  }
  if (buf.length < 44 || buf.toString('ascii', 0, 4) !== 'RIFF' || buf.toString('ascii', 8, 12) !== 'WAVE') {
    throw new UnreadableAudio(path, 'not a RIFF/WAVE file');
  }

  let fmt: { format: number; channels: number; sampleRate: number; bitsPerSample: number } | null = null;
  let dataOffset = -1;
  let dataLength = 0;
  let offset = 12;
  while (offset + 8 <= buf.length) {
    const chunkId = buf.toString('ascii', offset, offset + 4);
    const chunkSize = buf.readUInt32LE(offset + 4);
    const body = offset + 8;
    if (chunkId === 'fmt ') {
      if (body + 16 > buf.length) throw new UnreadableAudio(path, 'truncated fmt chunk');
      fmt = {
        format: buf.readUInt16LE(body),
        channels: buf.readUInt16LE(body + 2),
        sampleRate: buf.readUInt32LE(body + 4),
        bitsPerSample: buf.readUInt16LE(body + 14),
      };
    } else if (chunkId === 'data') {
      dataOffset = body;
      dataLength = Math.min(chunkSize, buf.length - body);
    }
    offset = body + chunkSize + (chunkSize % 2);
  }
  if (!fmt || dataOffset < 0) throw new UnreadableAudio(path, 'missing fmt or data chunk');
  if (fmt.channels < 1) throw new UnreadableAudio(path, 'zero channels');

  const channels: Float32Array[] = [];
  if (fmt.format === 1 && fmt.bitsPerSample === 16) {
    const frames = Math.floor(dataLength / (2 * fmt.channels));
    for (let c = 0; c < fmt.channels; c++) channels.push(new Float32Array(frames));
    for (let i = 0; i < frames; i++) {
      for (let c = 0; c < fmt.channels; c++) {
        channels[c][i] = buf.readInt16LE(dataOffset + (i * fmt.channels + c) * 2) / 32768;
      }
    }
  } else if (fmt.format === 3 && fmt.bitsPerSample === 32) {
    const frames = Math.floor(dataLength / (4 * fmt.channels));
    for (let c = 0; c < fmt.channels; c++) channels.push(new Float32Array(frames));
    for (let i = 0; i < frames; i++) {
      for (let c = 0; c < fmt.channels; c++) {
        channels[c][i] = buf.readFloatLE(dataOffset + (i * fmt.channels + c) * 4);
      }
    }
  } else {
    throw new UnreadableAudio(path, `unsupported encoding (format ${fmt.format}, ${fmt.bitsPerSample} bit)`);
  }
  return { samples: downmix(channels), sampleRate: fmt.sampleRate };
}

/** Mono 16-bit PCM writer, used for fixtures and round-trip checks. */
export function wavBytes(audio: RawAudio): Buffer {
  const n = audio.samples.length;
  const buf = Buffer.alloc(44 + n * 2);
  buf.write('RIFF', 0, 'ascii');
  buf.writeUInt32LE(36 + n * 2, 4);
  buf.write('WAVE', 8, 'ascii');
  buf.write('fmt ', 12, 'ascii');
  buf.writeUInt32LE(16, 16);
  buf.writeUInt16LE(1, 20); // PCM
  buf.writeUInt16LE(1, 22); // mono
  buf.writeUInt32LE(audio.sampleRate, 24);
  buf.writeUInt32LE(audio.sampleRate * 2, 28);
  buf.writeUInt16LE(2, 32);
  buf.writeUInt16LE(16, 34);
  buf.write('data', 36, 'ascii');
  buf.writeUInt32LE(n * 2, 40);
  for (let i = 0; i < n; i++) {
    const v = Math.max(-1, Math.min(1, audio.samples[i]));
    buf.writeInt16LE(Math.round(v * 32767), 44 + i * 2);
  }
  return buf;
}

async function readFlac(path: string): Promise<RawAudio> {
  let decoded;
  try {
    const { FLACDecoder } = await import('@wasm-audio-decoders/flac');
    const decoder = new FLACDecoder();
    await decoder.ready;
    decoded = await decoder.decodeFile(new Uint8Array(readFileSync(path)));
    decoder.free();
  } catch (err) {
    throw new UnreadableAudio(path, `flac decode failed: ${String(err)}`);
  }
  if (!decoded.channelData.length) throw new UnreadableAudio(path, 'flac has no channels');
  return { samples: downmix(decoded.channelData), sampleRate: decoded.sampleRate };
}

/** Read any supported container, downmixed to mono at 16 kHz. */
export async function readAudio(path: string): Promise<RawAudio> {
  const ext = extname(path).toLowerCase();
  let raw: RawAudio;
  if (ext === '.wav') raw = readWav(path);
  else if (ext === '.flac') raw = await readFlac(path);
  else throw new UnreadableAudio(path, `unsupported extension ${ext}`);
  return resampleLinear(raw, TARGET_SAMPLE_RATE);
}
