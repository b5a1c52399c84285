#!/usr/bin/env node
/**
 * Render the invariant figures of one run directory.
 *
 * Usage: slgflow-figures <run-directory> <output-directory>
 */

import { SchemaError } from "./artifacts.js";
import { render } from "./render.js";

function main(argv: string[]): number {
  if (argv.length !== 2) {
    console.error("usage: slgflow-figures <run-directory> <output-directory>");
    return 2;
  }
  const [runDir, outDir] = argv;
  try {
    const files = render(runDir, outDir);
    for (const f of files) {
      console.log(`figure -> ${f}`);
    }
    return 0;
  } catch (e) {
    if (e instanceof SchemaError) {
      console.error(`schema error: ${e.message}`);
      return 1;
    }
    throw e;
  }
}

process.exit(main(process.argv.slice(2)));
