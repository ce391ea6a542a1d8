/**
 * Deterministic hashed n-gram text embedding, matching the recommender's
 * built-in embedder bit-for-bit (documented in docs/formats.md): lowercase,
 * split into letter/number runs, hash word unigrams, word bigrams, and
 * character trigrams of the space-joined token stream with 64-bit FNV-1a into
 * signed buckets, then L2-normalize.
 */

import { fsum } from "./fsum.js";

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const MASK64 = (1n << 64n) - 1n;

const TOKEN_RE = /[\p{L}\p{N}]+/gu;
const encoder = new TextEncoder();

export function fnv1a64(bytes: Uint8Array): bigint {
  let h = FNV_OFFSET;
  for (const b of bytes) {
    h = ((h ^ BigInt(b)) * FNV_PRIME) & MASK64;
  }
  return h;
}

export function features(text: string): string[] {
  const tokens = text.toLowerCase().match(TOKEN_RE) ?? [];
  if (tokens.length === 0) return [];
  const doc = tokens.join(" ");
  const out = [...tokens];
  for (let i = 0; i + 1 < tokens.length; i++) {
    out.push(`${tokens[i]} ${tokens[i + 1]}`);
  }
  const chars = Array.from(doc); // code points, matching Python slicing
  for (let i = 0; i + 3 <= chars.length; i++) {
    out.push(chars[i] + chars[i + 1] + chars[i + 2]);
  }
  return out;
}

export function embedText(text: string, dim: number): Float64Array {
  const counts = new Float64Array(dim);
  const feats = features(text);
  if (feats.length === 0) return counts; // reserved zero vector
  const dimBig = BigInt(dim);
  for (const feat of feats) {
    const h = fnv1a64(encoder.encode(feat));
    const bucket = Number(h % dimBig);
    counts[bucket] += h >> 63n ? -1.0 : 1.0;
  }
  // counts are exact small integers, so this sum is exact in any order
  let sq = 0;
  for (const c of counts) sq += c * c;
  const norm = Math.sqrt(sq);
  if (norm > 0) {
    for (let i = 0; i < dim; i++) counts[i] /= norm;
  }
  return counts;
}

/**
 * Combine per-stage unit vectors exactly like the recommender: identical rows
 * collapse to that row; otherwise mean then renormalize by an exactly rounded
 * sum of squares.
 */
export function aggregateStageVectors(vectors: Float64Array[]): Float64Array {
  if (vectors.length === 0) throw new Error("no stage vectors to aggregate");
  const dim = vectors[0].length;
  const first = vectors[0];
  const allEqual = vectors.every((v) => {
    for (let i = 0; i < dim; i++) if (v[i] !== first[i]) return false;
    return true;
  });
  if (allEqual) return Float64Array.from(first);

  const mean = new Float64Array(dim);
  for (let i = 0; i < dim; i++) {
    let acc = 0;
    for (const v of vectors) acc += v[i];
    mean[i] = acc / vectors.length;
  }
  const norm = Math.sqrt(fsum(Array.from(mean, (v) => v * v)));
  if (norm > 0) {
    for (let i = 0; i < dim; i++) mean[i] /= norm;
  }
  return mean;
}
