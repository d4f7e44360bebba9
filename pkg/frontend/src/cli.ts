import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { parseNumericCsv } from "./csv.js";
import { FIGURE_KINDS, renderFigure } from "./figures.js";

export function run(argv: string[]): string {
  const { values } = parseArgs({
    args: argv,
    options: {
      input: { type: "string" },
      kind: { type: "string" },
      output: { type: "string" },
    },
    strict: true,
  });
  for (const flag of ["input", "kind", "output"] as const) {
    if (!values[flag]) {
      throw new Error(
        `missing required flag --${flag} (usage: plotkit --input run.csv --kind ${FIGURE_KINDS.join("|")} --output fig.svg)`,
      );
    }
  }
  const table = parseNumericCsv(readFileSync(values.input!, "utf8"));
  const svg = renderFigure(values.kind!, table);
  const dir = dirname(values.output!);
  if (dir) mkdirSync(dir, { recursive: true });
  writeFileSync(values.output!, svg);
  return values.output!;
}

function main(): void {
  try {
    const out = run(process.argv.slice(2));
    console.log(`wrote ${out}`);
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    process.exit(1);
  }
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  main();
}
