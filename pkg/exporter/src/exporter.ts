/**
 * Export pipeline: corpus in, vector file out.
 *
 * Writes one vector per metadata document (key `meta:<id>`) and one per
 * source-tagged pipeline (key `pipe:<id>:<source>`, aggregated over its stage
 * texts), L2-normalized, in the recommender's JSONL vector format. The output
 * is written atomically (temp file, then rename).
 */

import { mkdtempSync, renameSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";

import { loadCorpus, metadataDocument } from "./corpus.js";
import { aggregateStageVectors, fnv1a64 } from "./embedder.js";
import type { EmbeddingModel } from "./model.js";
import { canonicalText, loadRegistry } from "./registry.js";
import { fsum } from "./fsum.js";

export interface ExportManifest {
  corpus: string;
  model: string;
  out: string;
  dim: number;
  count: number;
}

function normalizeUnit(vec: Float64Array): Float64Array {
  const norm = Math.sqrt(fsum(Array.from(vec, (v) => v * v)));
  // vectors the model already normalized are left untouched: renormalizing
  // by a norm within rounding error of 1 would only perturb the last bit
  if (norm > 0 && Math.abs(norm - 1.0) > 1e-12) {
    const out = Float64Array.from(vec);
    for (let i = 0; i < out.length; i++) out[i] /= norm;
    return out;
  }
  return vec;
}

export async function exportVectors(
  corpusPath: string,
  model: EmbeddingModel,
  registryPath: string,
  outPath: string
): Promise<ExportManifest> {
  const corpus = loadCorpus(corpusPath);
  const registry = loadRegistry(registryPath);

  const keys: string[] = [];
  const vectors: Float64Array[] = [];
  const seen = new Set<string>();

  for (const record of corpus) {
    const metaKey = `meta:${record.id}`;
    if (seen.has(metaKey)) throw new Error(`key collision: ${metaKey}`);
    seen.add(metaKey);
    const [metaVec] = await model.embed([metadataDocument(record)]);
    keys.push(metaKey);
    vectors.push(metaVec);

    for (const sourced of record.pipelines) {
      const pipeKey = `pipe:${record.id}:${sourced.source}`;
      if (seen.has(pipeKey)) throw new Error(`key collision: ${pipeKey}`);
      seen.add(pipeKey);
      const stageTexts = canonicalText(registry, sourced.pipeline);
      const stageVecs = await model.embed(stageTexts);
      keys.push(pipeKey);
      vectors.push(aggregateStageVectors(stageVecs));
    }
  }

  const lines = keys.map((key, i) => {
    const vec = normalizeUnit(vectors[i]);
    return JSON.stringify({ key, dim: model.dim, values: Array.from(vec) });
  });

  const scratch = mkdtempSync(join(tmpdir(), "embed-export-"));
  const tmpFile = join(scratch, "vectors.jsonl");
  try {
    writeFileSync(tmpFile, lines.length ? lines.join("\n") + "\n" : "", "utf-8");
    renameSync(tmpFile, outPath);
  } catch (err) {
    // cross-device rename fallback keeps the write atomic-enough: write to a
    // sibling temp path in the destination directory, then rename
    const sibling = join(
      dirname(outPath),
      `.embed-export-${fnv1a64(new TextEncoder().encode(outPath)).toString(16)}.tmp`
    );
    writeFileSync(sibling, lines.length ? lines.join("\n") + "\n" : "", "utf-8");
    renameSync(sibling, outPath);
  } finally {
    rmSync(scratch, { recursive: true, force: true });
  }

  return {
    corpus: corpusPath,
    model: model.name,
    out: outPath,
    dim: model.dim,
    count: keys.length,
  };
}
