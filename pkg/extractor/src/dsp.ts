/**
 * Frame-level spectral features: Hann-windowed FFT power spectra collapsed
 * through a triangular filterbank into log energies. 25 ms windows, 10 ms hop.
 */

import { RawAudio } from './audio.js';

export const FRAME_LENGTH = 400; // 25 ms at 16 kHz
export const FRAME_HOP = 160; // 10 ms at 16 kHz
export const FFT_SIZE = 512;
export const N_BANDS = 40;

/** In-place iterative radix-2 FFT over interleaved-free re/im arrays. */
export function fft(re: Float64Array, im: Float64Array): void {
  const n = re.length;
  if ((n & (n - 1)) !== 0) throw new Error(`FFT size must be a power of two, got ${n}`);
  for (let i = 1, j = 0; i < n; i++) {
    let bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      [re[i], re[j]] = [re[j], re[i]];
      [im[i], im[j]] = [im[j], im[i]];
    }
  }
  for (let len = 2; len <= n; len <<= 1) {
    const angle = (-2 * Math.PI) / len;
    const wRe = Math.cos(angle);
    const wIm = Math.sin(angle);
    for (let start = 0; start < n; start += len) {
      let curRe = 1;
      let curIm = 0;
      for (let k = 0; k < len / 2; k++) {
        const evenRe = re[start + k];
        const evenIm = im[start + k];
        const oddRe = re[start + k + len / 2] * curRe - im[start + k + len / 2] * curIm;
        const oddIm = re[start + k + len / 2] * curIm + im[start + k + len / 2] * curRe;
        re[start + k] = evenRe + oddRe;
        im[start + k] = evenIm + oddIm;
        re[start + k + len / 2] = evenRe - oddRe;
        im[start + k + len / 2] = evenIm - oddIm;
        const nextRe = curRe * wRe - curIm * wIm;
        curIm = curRe * wIm + curIm * wRe;
        curRe = nextRe;
      }
    }
  }
}

const hannWindow = new Float64Array(FRAME_LENGTH);
for (let i = 0; i < FRAME_LENGTH; i++) {
  hannWindow[i] = 0.5 - 0.5 * Math.cos((2 * Math.PI * i) / (FRAME_LENGTH - 1));
}

/** Triangular filterbank over the linear frequency axis, by bin index. */
function buildFilterbank(): { lo: number; mid: number; hi: number }[] {
  const nBins = FFT_SIZE / 2 + 1;
  const edges: number[] = [];
  for (let b = 0; b <= N_BANDS + 1; b++) {
    edges.push(1 + ((nBins - 2) * b) / (N_BANDS + 1));
  }
  const bands = [];
  for (let b = 0; b < N_BANDS; b++) {
    bands.push({ lo: edges[b], mid: edges[b + 1], hi: edges[b + 2] });
  }
  return bands;
}

const filterbank = buildFilterbank();

function bandEnergies(power: Float64Array): Float64Array {
  const out = new Float64Array(N_BANDS);
  for (let b = 0; b < N_BANDS; b++) {
    const { lo, mid, hi } = filterbank[b];
    let acc = 0;
    for (let k = Math.ceil(lo); k <= Math.floor(hi) && k < power.length; k++) {
      const weight = k <= mid ? (k - lo) / (mid - lo) : (hi - k) / (hi - mid);
      if (weight > 0) acc += weight * power[k];
    }
    out[b] = Math.log(acc + 1e-10);
  }
  return out;
}

/** Log filterbank energies per frame; at least one frame even for short audio. */
export function frameFeatures(audio: RawAudio): Float64Array[] {
  const samples = audio.samples;
  const frames: Float64Array[] = [];
  const nFrames = Math.max(1, 1 + Math.floor((samples.length - FRAME_LENGTH) / FRAME_HOP));
  const re = new Float64Array(FFT_SIZE);
  const im = new Float64Array(FFT_SIZE);
  for (let f = 0; f < nFrames; f++) {
    re.fill(0);
    im.fill(0);
    const start = f * FRAME_HOP;
    for (let i = 0; i < FRAME_LENGTH; i++) {
      const s = start + i < samples.length ? samples[start + i] : 0;
      re[i] = s * hannWindow[i];
    }
    fft(re, im);
    const power = new Float64Array(FFT_SIZE / 2 + 1);
    for (let k = 0; k < power.length; k++) power[k] = re[k] * re[k] + im[k] * im[k];
    frames.push(bandEnergies(power));
  }
  return frames;
}

/** Root-mean-square energy per frame on the raw waveform. */
export function energyEnvelope(audio: RawAudio): Float64Array {
  const samples = audio.samples;
  const nFrames = Math.max(1, 1 + Math.floor((samples.length - FRAME_LENGTH) / FRAME_HOP));
  const out = new Float64Array(nFrames);
  for (let f = 0; f < nFrames; f++) {
    const start = f * FRAME_HOP;
    let acc = 0;
    let count = 0;
    for (let i = start; i < Math.min(start + FRAME_LENGTH, samples.length); i++) {
      acc += samples[i] * samples[i];
      count++;
    }
    out[f] = Math.sqrt(acc / Math.max(count, 1));
  }
  return out;
}
