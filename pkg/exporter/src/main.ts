#!/usr/bin/env node
/**
 * CLI: embed-export export --corpus <p> --model <id> --out <p> [--registry <p>]
 */

import { existsSync } from "node:fs";
import { resolve } from "node:path";
import { fileURLToPath } from "node:url";
import { parseArgs } from "node:util";

import { exportVectors } from "./exporter.js";
import { loadModel } from "./model.js";

function defaultRegistryPath(): string {
  // repo layout: exporter/dist/main.js -> ../../docs/registry.json
  const here = fileURLToPath(import.meta.url);
  return resolve(here, "..", "..", "..", "docs", "registry.json");
}

async function main(argv: string[]): Promise<number> {
  const command = argv[0];
  if (command !== "export") {
    console.error("usage: embed-export export --corpus <path> --model <id> --out <path> [--registry <path>]");
    return 2;
  }
  const { values } = parseArgs({
    args: argv.slice(1),
    options: {
      corpus: { type: "string" },
      model: { type: "string", default: "hashed-512" },
      out: { type: "string" },
      registry: { type: "string" },
    },
  });
  if (!values.corpus || !values.out) {
    console.error("error: --corpus and --out are required");
    return 2;
  }
  const registryPath = values.registry ?? defaultRegistryPath();
  if (!existsSync(registryPath)) {
    console.error(`error: registry file not found at ${registryPath}; pass --registry`);
    return 2;
  }
  try {
    const model = await loadModel(values.model!);
    const manifest = await exportVectors(values.corpus, model, registryPath, values.out);
    console.log(JSON.stringify(manifest));
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

main(process.argv.slice(2)).then((code) => {
  process.exitCode = code;
});
