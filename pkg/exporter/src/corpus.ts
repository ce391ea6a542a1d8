/**
 * Minimal reader for the recommender's JSONL corpus format: just the fields
 * the exporter needs (metadata text and source-tagged pipelines).
 */

import { readFileSync } from "node:fs";

import type { PipelineDoc } from "./registry.js";

export interface SourcedPipeline {
  source: string;
  pipeline: PipelineDoc;
}

export interface CorpusRecord {
  id: string;
  title: string;
  subtitle: string;
  description: string;
  keywords: string[];
  pipelines: SourcedPipeline[];
}

export function metadataDocument(record: CorpusRecord): string {
  const parts = [record.title, record.subtitle, record.description, ...record.keywords];
  return parts.filter((p) => p).join(" ");
}

export function loadCorpus(path: string): CorpusRecord[] {
  const records: CorpusRecord[] = [];
  const seen = new Map<string, number>();
  const lines = readFileSync(path, "utf-8").split("\n");
  lines.forEach((line, index) => {
    if (!line.trim()) return;
    const lineno = index + 1;
    let obj: any;
    try {
      obj = JSON.parse(line);
    } catch (err) {
      throw new Error(`line ${lineno}: invalid JSON: ${(err as Error).message}`);
    }
    if (typeof obj.id !== "string" || obj.id.length === 0) {
      throw new Error(`line ${lineno}: record must have a nonempty string id`);
    }
    const first = seen.get(obj.id);
    if (first !== undefined) {
      throw new Error(
        `line ${lineno}: duplicate dataset id ${JSON.stringify(obj.id)} (first seen on line ${first})`
      );
    }
    seen.set(obj.id, lineno);
    records.push({
      id: obj.id,
      title: obj.title ?? "",
      subtitle: obj.subtitle ?? "",
      description: obj.description ?? "",
      keywords: obj.keywords ?? [],
      pipelines: (obj.pipelines ?? []).map((sp: any) => ({
        source: sp.source,
        pipeline: sp.pipeline,
      })),
    });
  });
  return records;
}
