import { existsSync, readFileSync } from "node:fs";
import path from "node:path";
import { afterAll, afterEach, beforeAll, describe, expect, it, vi } from "vitest";

import { main } from "../src/cli.js";
import { syntheticCsv, tempWorkspace, writeCsv } from "./helpers.js";

const [WORKDIR, cleanup] = tempWorkspace("cli-test");
afterAll(cleanup);

let csvPath: string;
let configPath: string;

beforeAll(() => {
  csvPath = writeCsv(WORKDIR, "trace.csv", syntheticCsv({ steps: 80, seed: 41 }));
  configPath = path.join(WORKDIR, "trainer.cfg");
  writeCsv(WORKDIR, "trainer.cfg", [
    "# tiny operating point for the CLI round-trip",
    "window=6",
    "horizon=2",
    "lstm_units_1=4",
    "lstm_units_2=3",
    "gru_units=2",
    "dense_units=6",
    "batch_size=32",
    "learning_rate=0.01",
    "epochs=3",
    "stride=2",
    "subsample_points=80",
    "",
  ].join("\n"));
});

afterEach(() => {
  vi.restoreAllMocks();
});

function silence(): { logs: string[]; errors: string[] } {
  const logs: string[] = [];
  const errors: string[] = [];
  vi.spyOn(console, "log").mockImplementation((...args: unknown[]) => {
    logs.push(args.join(" "));
  });
  vi.spyOn(console, "error").mockImplementation((...args: unknown[]) => {
    errors.push(args.join(" "));
  });
  return { logs, errors };
}

describe("cpf-trainer CLI", () => {
  it("trains and predicts end to end with config file plus --set", async () => {
    const { logs } = silence();
    const modelDir = path.join(WORKDIR, "model");
    const reportPath = path.join(WORKDIR, "report.json");
    const code = await main([
      "train", "--data", csvPath, "--out", modelDir,
      "--config", configPath, "--set", "epochs=2",
      "--report", reportPath,
    ]);
    expect(code).toBe(0);
    const trainReport = JSON.parse(readFileSync(reportPath, "utf8"));
    expect(trainReport.epochs).toBe(2); // --set wins over the file's epochs=3
    expect(trainReport.trainLoss).toHaveLength(2);
    expect(logs.some((l) => l.startsWith("trained 2 epochs"))).toBe(true);

    const predPath = path.join(WORKDIR, "pred.csv");
    const predCode = await main([
      "predict", "--model", modelDir, "--data", csvPath,
      "--out", predPath, "--stride", "9",
    ]);
    expect(predCode).toBe(0);
    const lines = readFileSync(predPath, "utf8").trim().split("\n");
    expect(lines[0]).toBe("trial,user,h_pred_real,h_pred_imag");
    // span 8: starts 0,9,...,72 -> 9 windows per user.
    expect(lines).toHaveLength(1 + 18);
  }, 120_000);

  it("prints usage and exits 2 without a command", async () => {
    const { logs } = silence();
    expect(await main([])).toBe(2);
    expect(logs.join("\n")).toContain("usage:");
  });

  it("exits 0 for --help", async () => {
    silence();
    expect(await main(["--help"])).toBe(0);
  });

  it("exits 2 for an unknown command", async () => {
    const { errors } = silence();
    expect(await main(["frobnicate"])).toBe(2);
    expect(errors.join("\n")).toContain('unknown command "frobnicate"');
  });

  it("exits 2 when a required option is missing", async () => {
    const { errors } = silence();
    expect(await main(["train", "--data", csvPath])).toBe(2);
    expect(errors.join("\n")).toContain("missing required option --out");
  });

  it("exits 2 for a malformed --stride", async () => {
    const { errors } = silence();
    expect(await main(["predict", "--model", "m", "--data", csvPath,
                       "--out", "x.csv", "--stride", "zero"])).toBe(2);
    expect(errors.join("\n")).toContain("--stride must be an integer >= 1");
  });

  it("exits 1 when the dataset file is missing", async () => {
    const { errors } = silence();
    expect(await main(["train", "--data", path.join(WORKDIR, "nope.csv"),
                       "--out", path.join(WORKDIR, "m2")])).toBe(1);
    expect(errors.join("\n")).toMatch(/error: .*nope\.csv/);
  });

  it("exits 1 for an invalid --set value", async () => {
    const { errors } = silence();
    expect(await main(["train", "--data", csvPath,
                       "--out", path.join(WORKDIR, "m3"),
                       "--set", "epochs=texture"])).toBe(1);
    expect(errors.join("\n")).toContain('invalid value "texture" for epochs');
  });

  it("does not write a model when training aborts", async () => {
    const { errors } = silence();
    const modelDir = path.join(WORKDIR, "nan-model");
    const code = await main([
      "train", "--data", csvPath, "--out", modelDir,
      "--config", configPath, "--set", "learning_rate=1e12", "--set", "epochs=2",
    ]);
    expect(code).toBe(1);
    expect(errors.join("\n")).toMatch(/non-finite \(NaN\) at epoch \d+/);
    expect(existsSync(modelDir)).toBe(false);
  }, 120_000);
});
