/**
 * Backend featurizers producing fixed-dimension pooled utterance vectors.
 *
 * Each backend id maps to the embedding width of the corresponding frozen
 * model. The bundled featurizers are deterministic signal-processing proxies
 * (log filterbank frames pushed through a fixed seeded projection); a real
 * checkpoint-backed encoder plugs in behind the same Featurizer interface.
 */

import { RawAudio } from './audio.js';
import { N_BANDS, frameFeatures } from './dsp.js';

export type Pooling = 'mean' | 'max';

export interface Featurizer {
  id: string;
  dim: number;
  /** One row per frame, each of length dim. */
  frameVectors(audio: RawAudio): Float64Array[];
}

export class BackendLoadError extends Error {}

/** 32-bit integer mix (splitmix-style), deterministic across platforms. */
function mix32(x: number): number {
  x = Math.imul(x ^ (x >>> 16), 0x45d9f3b);
  x = Math.imul(x ^ (x >>> 16), 0x45d9f3b);
  return (x ^ (x >>> 16)) >>> 0;
}

/** Projection entry in [-1, 1), a pure function of (seed, row, col). */
function projectionEntry(seed: number, row: number, col: number): number {
  const h = mix32(mix32(seed ^ Math.imul(row + 1, 0x9e3779b1)) ^ Math.imul(col + 1, 0x85ebca6b));
  return (h / 2 ** 31) - 1;
}

class ProxyFeaturizer implements Featurizer {
  private projection: Float64Array | null = null;

  constructor(
    public readonly id: string,
    public readonly dim: number,
    private readonly seed: number,
  ) {}

  private matrix(): Float64Array {
    if (this.projection === null) {
      const flat = new Float64Array(this.dim * N_BANDS);
      const scale = 1 / Math.sqrt(N_BANDS);
      for (let r = 0; r < this.dim; r++) {
        for (let c = 0; c < N_BANDS; c++) {
          flat[r * N_BANDS + c] = projectionEntry(this.seed, r, c) * scale;
        }
      }
      this.projection = flat;
    }
    return this.projection;
  }

  frameVectors(audio: RawAudio): Float64Array[] {
    const proj = this.matrix();
    return frameFeatures(audio).map((bands) => {
      const out = new Float64Array(this.dim);
      for (let r = 0; r < this.dim; r++) {
        let acc = 0;
        const base = r * N_BANDS;
        for (let c = 0; c < N_BANDS; c++) acc += proj[base + c] * bands[c];
        out[r] = Math.tanh(acc);
      }
      return out;
    });
  }
}

const REGISTRY: Record<string, () => Featurizer> = {
  'hubert-large': () => new ProxyFeaturizer('hubert-large', 1024, 0x48554231),
  'hubert-large-asr': () => new ProxyFeaturizer('hubert-large-asr', 1024, 0x48554232),
  'clap-substitute': () => new ProxyFeaturizer('clap-substitute', 784, 0x434c4150),
  rawnet3: () => new ProxyFeaturizer('rawnet3', 192, 0x52574e33),
};

export const BACKEND_DIMS: Record<string, number> = {
  'hubert-large': 1024,
  'hubert-large-asr': 1024,
  'clap-substitute': 784,
  rawnet3: 192,
};

export function loadFeaturizer(backend: string): Featurizer {
  const factory = REGISTRY[backend];
  if (!factory) {
    throw new BackendLoadError(`unknown backend ${backend}; known: ${Object.keys(REGISTRY).join(', ')}`);
  }
  return factory();
}

/** Pool frame vectors into one utterance vector (float32 for storage). */
export function pool(frames: Float64Array[], mode: Pooling): Float32Array {
  if (frames.length === 0) throw new Error('cannot pool zero frames');
  const dim = frames[0].length;
  const out = new Float32Array(dim);
  if (mode === 'mean') {
    const acc = new Float64Array(dim);
    for (const frame of frames) {
      for (let i = 0; i < dim; i++) acc[i] += frame[i];
    }
    for (let i = 0; i < dim; i++) out[i] = acc[i] / frames.length;
  } else {
    out.fill(-Infinity);
    for (const frame of frames) {
      for (let i = 0; i < dim; i++) out[i] = Math.max(out[i], frame[i]);
    }
  }
  return out;
}
