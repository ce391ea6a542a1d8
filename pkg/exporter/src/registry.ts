/**
 * Primitive registry published by the recommender (docs/registry.json): the
 * canonical call signatures and doc headers that pipeline embedding text is
 * built from.
 */

import { readFileSync } from "node:fs";

import { pythonScalarRepr } from "./pyfloat.js";

export interface RegistryParam {
  name: string;
  type: string; // real | int | str | bool
  default: unknown;
}

export interface RegistryEntry {
  name: string;
  kind: string;
  doc_header: string;
  params: RegistryParam[];
}

export interface Registry {
  separator: string;
  primitives: Map<string, RegistryEntry>;
}

export function loadRegistry(path: string): Registry {
  const obj = JSON.parse(readFileSync(path, "utf-8"));
  const primitives = new Map<string, RegistryEntry>();
  for (const entry of obj.primitives as RegistryEntry[]) {
    primitives.set(entry.name, entry);
  }
  return { separator: obj.separator, primitives };
}

export interface PipelineStage {
  kind: string;
  primitive: string;
  params: Record<string, unknown>;
}

export interface PipelineDoc {
  stages: PipelineStage[];
}

/** One embedding string per stage: call with actual values plus doc header. */
export function canonicalText(registry: Registry, pipeline: PipelineDoc): string[] {
  return pipeline.stages.map((stage) => {
    const entry = registry.primitives.get(stage.primitive);
    if (!entry) {
      throw new Error(`unknown primitive ${JSON.stringify(stage.primitive)} in pipeline`);
    }
    const parts = entry.params.map((p) => {
      const value = stage.params !== undefined && p.name in stage.params
        ? stage.params[p.name]
        : p.default;
      return `${p.name}=${pythonScalarRepr(value, p.type)}`;
    });
    return `${entry.name}(${parts.join(", ")})${registry.separator}${entry.doc_header}`;
  });
}
