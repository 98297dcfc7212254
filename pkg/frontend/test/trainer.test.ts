import { existsSync, readFileSync } from "node:fs";
import path from "node:path";
import { afterAll, describe, expect, it } from "vitest";

import { applyOverrides, DEFAULT_CONFIG, type TrainerConfig } from "../src/config.js";
import { parseDataset, N_TARGETS } from "../src/datafile.js";
import { ARTIFACT_FORMAT, MODEL_FILE, TRAINER_FILE, WEIGHTS_FILE } from "../src/model.js";
import { fitArrays, trainDataset } from "../src/train.js";
import { buildTrainingArrays, mulberry32 } from "../src/windows.js";
import { syntheticCsv, tempWorkspace } from "./helpers.js";

const [WORKDIR, cleanup] = tempWorkspace("trainer-test");
afterAll(cleanup);

function cfgWith(...pairs: string[]): TrainerConfig {
  return applyOverrides(DEFAULT_CONFIG, pairs);
}

/** Small-but-learnable operating point shared by the tests below. */
const TINY = cfgWith("window=8", "horizon=2", "lstm_units_1=6", "lstm_units_2=4",
                     "gru_units=3", "dense_units=8", "batch_size=64",
                     "learning_rate=0.01", "epochs=5", "stride=2",
                     "subsample_points=200", "seed=11");

const DATASET = parseDataset(syntheticCsv({ steps: 200, seed: 31 }), "synt.csv");

describe("trainDataset", () => {
  it("descends on a learnable series and writes a versioned artifact", async () => {
    const modelDir = path.join(WORKDIR, "descent-model");
    const report = await trainDataset(DATASET, TINY, modelDir);

    expect(report.epochs).toBe(TINY.epochs);
    expect(report.trainLoss).toHaveLength(TINY.epochs);
    expect(report.valLoss).toHaveLength(TINY.epochs);
    for (const loss of [...report.trainLoss, ...report.valLoss]) {
      expect(Number.isFinite(loss)).toBe(true);
      expect(loss).toBeGreaterThanOrEqual(0);
    }
    expect(report.trainLoss[TINY.epochs - 1]).toBeLessThan(report.trainLoss[0]);
    expect(report.split).toBe(Math.floor(200 * TINY.trainFraction));
    expect(report.datasetFingerprint).toBe(DATASET.fingerprint);

    // Window bookkeeping: stride-2 starts below split-16, both users pooled.
    const starts = Math.floor((report.split - 10) / 2) + 1;
    expect(report.trainWindows).toBe(2 * starts);

    // Artifact layout: opaque directory with versioned metadata.
    for (const name of [MODEL_FILE, WEIGHTS_FILE, TRAINER_FILE]) {
      expect(existsSync(path.join(modelDir, name))).toBe(true);
    }
    const meta = JSON.parse(readFileSync(path.join(modelDir, TRAINER_FILE), "utf8"));
    expect(meta.format).toBe(ARTIFACT_FORMAT);
    expect(meta.datasetFingerprint).toBe(DATASET.fingerprint);
    expect(meta.config.window).toBe(8);
    expect(meta.scalers).toHaveLength(2);
    expect(meta.featureColumns).toEqual(
      ["h_raw_real", "h_raw_imag", "phi", "x_hat_real", "x_hat_imag"]);
  }, 120_000);

  it("reproduces loss curves exactly for identical seeds", async () => {
    const cfg = cfgWith("window=8", "horizon=2", "lstm_units_1=6",
                        "lstm_units_2=4", "gru_units=3", "dense_units=8",
                        "batch_size=64", "learning_rate=0.01", "epochs=3",
                        "stride=4", "subsample_points=200", "seed=77");
    const a = await fitArrays(cfg, buildTrainingArrays(DATASET, cfg));
    a.model.dispose();
    const b = await fitArrays(cfg, buildTrainingArrays(DATASET, cfg));
    b.model.dispose();
    expect(a.trainLoss).toHaveLength(3);
    for (let e = 0; e < 3; e++) {
      expect(Math.abs(b.trainLoss[e] - a.trainLoss[e])).toBeLessThanOrEqual(1e-6);
      expect(Math.abs(b.valLoss[e] - a.valLoss[e])).toBeLessThanOrEqual(1e-6);
    }
  }, 120_000);

  it("aborts with the epoch index when the loss explodes", async () => {
    const cfg = cfgWith("window=8", "horizon=2", "lstm_units_1=6",
                        "lstm_units_2=4", "gru_units=3", "batch_size=32",
                        "learning_rate=1e12", "epochs=4", "stride=2",
                        "subsample_points=200", "seed=13");
    const modelDir = path.join(WORKDIR, "nan-model");
    await expect(trainDataset(DATASET, cfg, modelDir))
      .rejects.toThrow(/loss became non-finite \(NaN\) at epoch \d+/);
    expect(existsSync(modelDir)).toBe(false);
  }, 120_000);
});

describe("shuffled-label control", () => {
  it("cannot descend below the variance of the targets", async () => {
    const cfg = cfgWith("window=8", "horizon=2", "lstm_units_1=6",
                        "lstm_units_2=4", "gru_units=3", "dense_units=8",
                        "batch_size=64", "learning_rate=0.01", "epochs=4",
                        "stride=2", "subsample_points=200", "seed=19");
    const arrays = buildTrainingArrays(DATASET, cfg);

    // Permute training targets across windows: inputs keep their true
    // dynamics but point at someone else's future.
    const yStride = cfg.horizon * N_TARGETS;
    const rand = mulberry32(99);
    const perm = Array.from({ length: arrays.train.n }, (_, i) => i);
    for (let i = perm.length - 1; i > 0; i--) {
      const j = Math.floor(rand() * (i + 1));
      [perm[i], perm[j]] = [perm[j], perm[i]];
    }
    const permuted = new Float32Array(arrays.train.ys.length);
    perm.forEach((src, dst) => {
      permuted.set(arrays.train.ys.subarray(src * yStride, (src + 1) * yStride),
                   dst * yStride);
    });
    arrays.train.ys = permuted;

    // Variance of the (standardized) validation targets = loss of the
    // best constant predictor; an uninformative model plateaus there.
    let mean = 0;
    for (const y of arrays.val.ys) mean += y;
    mean /= arrays.val.ys.length;
    let variance = 0;
    for (const y of arrays.val.ys) variance += (y - mean) ** 2;
    variance /= arrays.val.ys.length;

    const { model, valLoss } = await fitArrays(cfg, arrays);
    model.dispose();
    for (const loss of valLoss) {
      expect(loss).toBeGreaterThan(0.55 * variance);
    }
    expect(valLoss[valLoss.length - 1]).toBeLessThan(2.5 * variance);
  }, 120_000);
});

describe("input validation", () => {
  it("rejects traces shorter than one window", async () => {
    const short = parseDataset(syntheticCsv({ steps: 9, seed: 1 }), "short.csv");
    const cfg = cfgWith("window=8", "horizon=2", "subsample_points=10");
    await expect(trainDataset(short, cfg, path.join(WORKDIR, "no-model")))
      .rejects.toThrow(/9 usable time steps per user but one window needs/);
  });

  it("rejects a split that leaves no training windows", async () => {
    const ds = parseDataset(syntheticCsv({ steps: 30, seed: 2 }), "s.csv");
    const cfg = cfgWith("window=12", "horizon=4", "subsample_points=30",
                        "train_fraction=0.5");
    await expect(trainDataset(ds, cfg, path.join(WORKDIR, "no-model")))
      .rejects.toThrow(/training split has no complete windows/);
  });

  it("rejects a split that leaves no validation windows", async () => {
    const ds = parseDataset(syntheticCsv({ steps: 40, seed: 3 }), "s.csv");
    const cfg = cfgWith("window=12", "horizon=4", "subsample_points=40",
                        "train_fraction=0.9");
    await expect(trainDataset(ds, cfg, path.join(WORKDIR, "no-model")))
      .rejects.toThrow(/validation split has no complete windows/);
  });
});
