#!/usr/bin/env node
/**
 * cpf-trainer — train the recurrent channel predictor on a harness
 * dataset export and emit prediction CSVs for `goldnoma cpf-eval`.
 *
 *   cpf-trainer train   --data training_dataset.csv --out model_dir
 *                       [--config trainer.cfg] [--set KEY=VALUE ...]
 *                       [--report report.json]
 *   cpf-trainer predict --model model_dir --data training_dataset.csv
 *                       --out predictions.csv [--stride N] [--limit N]
 */

import { readFileSync, realpathSync, writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { applyOverrides, DEFAULT_CONFIG, parseConfigText, validateConfig,
         type TrainerConfig } from "./config.js";
import { predict } from "./predict.js";
import { train } from "./train.js";

const USAGE = `usage:
  cpf-trainer train   --data <dataset.csv> --out <model_dir>
                      [--config <file>] [--set KEY=VALUE ...] [--report <json>]
  cpf-trainer predict --model <model_dir> --data <dataset.csv> --out <csv>
                      [--stride N] [--limit N]`;

function loadConfig(configPath: string | undefined,
                    sets: readonly string[]): TrainerConfig {
  let cfg = DEFAULT_CONFIG;
  if (configPath !== undefined) {
    cfg = parseConfigText(readFileSync(configPath, "utf8"), configPath, cfg);
  }
  cfg = applyOverrides(cfg, sets);
  return validateConfig(cfg);
}

function requireOption(value: string | undefined, name: string): string {
  if (value === undefined) {
    throw new UsageError(`missing required option --${name}`);
  }
  return value;
}

class UsageError extends Error {}

function parsePositiveInt(value: string, name: string): number {
  const n = Number(value);
  if (!Number.isInteger(n) || n < 1) {
    throw new UsageError(`--${name} must be an integer >= 1, got ${value}`);
  }
  return n;
}

async function cmdTrain(argv: string[]): Promise<number> {
  const { values } = parseArgs({
    args: argv,
    options: {
      data: { type: "string" },
      out: { type: "string" },
      config: { type: "string" },
      set: { type: "string", multiple: true },
      report: { type: "string" },
    },
  });
  const data = requireOption(values.data, "data");
  const out = requireOption(values.out, "out");
  const cfg = loadConfig(values.config, values.set ?? []);
  const report = await train(data, cfg, out);
  if (values.report !== undefined) {
    writeFileSync(values.report, JSON.stringify(report, null, 2) + "\n");
  }
  const first = report.trainLoss[0];
  const last = report.trainLoss[report.trainLoss.length - 1];
  console.log(`trained ${report.epochs} epochs on ${report.trainWindows} windows `
              + `(${report.valWindows} validation); loss ${first.toExponential(4)}`
              + ` -> ${last.toExponential(4)}`);
  console.log(`wrote ${report.modelDir}`);
  return 0;
}

async function cmdPredict(argv: string[]): Promise<number> {
  const { values } = parseArgs({
    args: argv,
    options: {
      model: { type: "string" },
      data: { type: "string" },
      out: { type: "string" },
      stride: { type: "string" },
      limit: { type: "string" },
    },
  });
  const model = requireOption(values.model, "model");
  const data = requireOption(values.data, "data");
  const out = requireOption(values.out, "out");
  const rows = await predict(model, data, out, {
    stride: values.stride === undefined
      ? undefined : parsePositiveInt(values.stride, "stride"),
    limit: values.limit === undefined
      ? undefined : parsePositiveInt(values.limit, "limit"),
  });
  console.log(`wrote ${rows.length} predictions to ${out}`);
  return 0;
}

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  try {
    switch (command) {
      case "train":
        return await cmdTrain(rest);
      case "predict":
        return await cmdPredict(rest);
      case undefined:
      case "--help":
      case "-h":
        console.log(USAGE);
        return command === undefined ? 2 : 0;
      default:
        throw new UsageError(`unknown command ${JSON.stringify(command)}`);
    }
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`error: ${err.message}`);
      console.error(USAGE);
      return 2;
    }
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    return 1;
  }
}

function invokedDirectly(): boolean {
  if (process.argv[1] === undefined) return false;
  try {
    return import.meta.url === pathToFileURL(realpathSync(process.argv[1])).href;
  } catch {
    return false;
  }
}

if (invokedDirectly()) {
  main(process.argv.slice(2)).then((code) => { process.exitCode = code; });
}
