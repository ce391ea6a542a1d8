/**
 * Embedding model selection.
 *
 * `hashed-<dim>` is the deterministic built-in (no downloads, matches the
 * recommender's own embedder bit-for-bit). `use3` loads the Universal
 * Sentence Encoder through TensorFlow.js when those optional packages are
 * installed; a missing package or unreachable weight server surfaces as a
 * model load failure.
 */

import { embedText } from "./embedder.js";

export interface EmbeddingModel {
  name: string;
  dim: number;
  embed(texts: string[]): Promise<Float64Array[]>;
}

class HashedModel implements EmbeddingModel {
  name: string;
  dim: number;

  constructor(dim: number) {
    this.dim = dim;
    this.name = `hashed-${dim}`;
  }

  async embed(texts: string[]): Promise<Float64Array[]> {
    return texts.map((t) => embedText(t, this.dim));
  }
}

class Use3Model implements EmbeddingModel {
  name = "use3";
  dim = 512;
  private model: any;

  private constructor(model: any) {
    this.model = model;
  }

  static async load(): Promise<Use3Model> {
    let use: any;
    try {
      await import("@tensorflow/tfjs" as string);
      use = await import("@tensorflow-models/universal-sentence-encoder" as string);
    } catch (err) {
      throw new Error(
        `model load failure: use3 requires the optional packages @tensorflow/tfjs ` +
          `and @tensorflow-models/universal-sentence-encoder (${(err as Error).message})`
      );
    }
    try {
      return new Use3Model(await use.load());
    } catch (err) {
      throw new Error(`model load failure: could not load use3 weights (${(err as Error).message})`);
    }
  }

  async embed(texts: string[]): Promise<Float64Array[]> {
    const tensor = await this.model.embed(texts);
    const data: number[][] = await tensor.array();
    tensor.dispose();
    return data.map((row) => Float64Array.from(row));
  }
}

export async function loadModel(id: string): Promise<EmbeddingModel> {
  const hashed = /^hashed-(\d+)$/.exec(id);
  if (hashed) {
    const dim = parseInt(hashed[1], 10);
    if (dim < 1) throw new Error(`model load failure: bad dimension in ${id}`);
    return new HashedModel(dim);
  }
  if (id === "use3") {
    return Use3Model.load();
  }
  throw new Error(`model load failure: unknown model ${JSON.stringify(id)}`);
}
