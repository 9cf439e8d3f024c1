#!/usr/bin/env node
/**
 * Command line entry: render one SVG figure from a JSON spec file.
 *
 *   c3plab-figures render --spec figure.json
 */

import { renderToFile } from "./charts.js";
import { loadSpec, TableInputError, TableSchemaError } from "./tables.js";

export const EXIT_OK = 0;
export const EXIT_USAGE = 2;

const USAGE = "usage: c3plab-figures render --spec <figure.json>";

/** Run the CLI against an argv slice; returns the process exit code. */
export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (command !== "render") {
    console.error(USAGE);
    return EXIT_USAGE;
  }
  let specPath = "";
  for (let i = 0; i < rest.length; i += 1) {
    const arg = rest[i];
    if (arg === "--spec") {
      specPath = rest[i + 1] ?? "";
      i += 1;
    } else {
      console.error(`unknown argument '${arg}'`);
      console.error(USAGE);
      return EXIT_USAGE;
    }
  }
  if (specPath === "") {
    console.error(USAGE);
    return EXIT_USAGE;
  }
  try {
    const out = renderToFile(loadSpec(specPath));
    console.log(`wrote ${out}`);
    return EXIT_OK;
  } catch (err) {
    if (err instanceof TableInputError || err instanceof TableSchemaError) {
      console.error(`figure error: ${err.message}`);
      return EXIT_USAGE;
    }
    throw err;
  }
}

if (process.argv[1]?.endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
