/**
 * Render a figure from metric-trace CSVs.
 *
 * Usage:
 *   nvgd-figures <kind> --input <glob> --output <file.svg> [options]
 *   nvgd-figures --spec <spec.json>
 *
 * Kinds: sd_curve | mmd_curve | scatter | dim_sweep | accuracy_curve
 * Options: --reference <csv>  --metric <name>  --title <text>
 *          --log-y | --linear-y  --width <px>  --height <px>
 */

import { readFileSync } from "node:fs";

import { FIGURE_KINDS, renderToFile, type FigureKind, type FigureSpec } from "./figures.js";

class UsageError extends Error {}

function fail(msg: string): never {
  throw new UsageError(msg);
}

export function parseArgs(argv: string[]): FigureSpec {
  if (argv[0] === "--spec") {
    if (!argv[1]) fail("--spec needs a file path");
    const spec = JSON.parse(readFileSync(argv[1], "utf8")) as FigureSpec;
    if (!FIGURE_KINDS.includes(spec.kind)) fail(`unknown figure kind ${JSON.stringify(spec.kind)}`);
    if (!spec.input || !spec.output) fail("spec needs input and output");
    return spec;
  }
  const kind = argv[0] as FigureKind;
  if (!FIGURE_KINDS.includes(kind)) {
    fail(`unknown figure kind ${JSON.stringify(argv[0])}; kinds: ${FIGURE_KINDS.join(", ")}`);
  }
  const spec: Partial<FigureSpec> = { kind };
  for (let i = 1; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) fail(`${arg} needs a value`);
      return argv[++i];
    };
    switch (arg) {
      case "--input":
        spec.input = next();
        break;
      case "--output":
        spec.output = next();
        break;
      case "--reference":
        spec.reference = next();
        break;
      case "--metric":
        spec.metric = next();
        break;
      case "--title":
        spec.title = next();
        break;
      case "--log-y":
        spec.logY = true;
        break;
      case "--linear-y":
        spec.logY = false;
        break;
      case "--width":
        spec.width = Number(next());
        break;
      case "--height":
        spec.height = Number(next());
        break;
      default:
        fail(`unknown option ${JSON.stringify(arg)}`);
    }
  }
  if (!spec.input || !spec.output) fail("--input and --output are required");
  return spec as FigureSpec;
}

export function main(argv: string[]): number {
  try {
    const spec = parseArgs(argv);
    renderToFile(spec);
    process.stdout.write(`wrote ${spec.output}\n`);
    return 0;
  } catch (e) {
    process.stderr.write(`error: ${e instanceof Error ? e.message : String(e)}\n`);
    return 1;
  }
}

