/**
 * Recurrent channel predictor: two stacked LSTM layers (widths from the
 * config, defaults 128 and 64) followed by a gated recurrent layer
 * (default 32), each normalized, with dropout after the first and last
 * recurrent blocks, a dense hidden layer, and a linear output that is
 * reshaped to (horizon, 2) — one (real, imag) pair per predicted step.
 *
 * Everything stochastic (weight init, dropout masks) is seeded from the
 * config so two runs with the same seed produce identical loss curves.
 *
 * Artifacts are self-contained versioned directories:
 *   model.json   network topology + weight manifest
 *   weights.bin  weight values
 *   trainer.json format version, trainer config, per-user scalers, and
 *                the fingerprint of the dataset the model was trained on
 */

import * as tf from "@tensorflow/tfjs";
import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import path from "node:path";

import type { TrainerConfig } from "./config.js";
import { configFromRecord, configRecord } from "./config.js";
import { FEATURE_COLUMNS, N_FEATURES, N_TARGETS, TARGET_COLUMNS } from "./datafile.js";
import type { UserScalers } from "./windows.js";

export const ARTIFACT_FORMAT = "cpf-trainer/1";
export const MODEL_FILE = "model.json";
export const WEIGHTS_FILE = "weights.bin";
export const TRAINER_FILE = "trainer.json";

/** Adam's update is scale-free (lr * m/(sqrt(v)+eps)), so on a loss floor
 *  the machine-noise gradients would still move weights by nearly the full
 *  learning rate each step, destabilizing already-exact fits. A larger
 *  epsilon keeps noise-scale gradients producing noise-scale steps while
 *  leaving ordinary gradients (>> 1e-3) essentially untouched. */
export const ADAM_EPSILON = 1e-3;

export function makeOptimizer(cfg: TrainerConfig): tf.Optimizer {
  return tf.train.adam(cfg.learningRate, 0.9, 0.999, ADAM_EPSILON);
}

export function buildModel(cfg: TrainerConfig): tf.Sequential {
  let seed = cfg.seed;
  const init = () => tf.initializers.glorotUniform({ seed: seed++ });
  const model = tf.sequential();
  model.add(tf.layers.lstm({
    units: cfg.lstmUnits1,
    returnSequences: true,
    inputShape: [cfg.window, N_FEATURES],
    implementation: 2,
    kernelInitializer: init(),
    recurrentInitializer: init(),
  }));
  model.add(tf.layers.layerNormalization());
  model.add(tf.layers.dropout({ rate: cfg.dropout1, seed: seed++ }));
  model.add(tf.layers.lstm({
    units: cfg.lstmUnits2,
    returnSequences: true,
    implementation: 2,
    kernelInitializer: init(),
    recurrentInitializer: init(),
  }));
  model.add(tf.layers.layerNormalization());
  model.add(tf.layers.gru({
    units: cfg.gruUnits,
    implementation: 2,
    kernelInitializer: init(),
    recurrentInitializer: init(),
  }));
  model.add(tf.layers.layerNormalization());
  model.add(tf.layers.dropout({ rate: cfg.dropout2, seed: seed++ }));
  model.add(tf.layers.dense({
    units: cfg.denseUnits,
    activation: "relu",
    kernelInitializer: init(),
  }));
  model.add(tf.layers.dense({
    units: cfg.horizon * N_TARGETS,
    activation: "linear",
    kernelInitializer: init(),
  }));
  model.add(tf.layers.reshape({ targetShape: [cfg.horizon, N_TARGETS] }));
  model.compile({
    optimizer: makeOptimizer(cfg),
    loss: "meanSquaredError",
  });
  return model;
}

export interface ArtifactMeta {
  format: string;
  config: Record<string, number>;
  datasetFingerprint: string;
  featureColumns: string[];
  targetColumns: string[];
  scalers: UserScalers[];
}

export interface LoadedArtifact {
  model: tf.LayersModel;
  cfg: TrainerConfig;
  meta: ArtifactMeta;
}

/** Write the model plus trainer metadata into `dir` (created if needed). */
export async function saveArtifact(dir: string, model: tf.LayersModel,
                                   cfg: TrainerConfig, scalers: UserScalers[],
                                   datasetFingerprint: string): Promise<void> {
  mkdirSync(dir, { recursive: true });
  let captured: tf.io.ModelArtifacts | undefined;
  await model.save(tf.io.withSaveHandler(async (artifacts) => {
    captured = artifacts;
    return {
      modelArtifactsInfo: {
        dateSaved: new Date(0),
        modelTopologyType: "JSON",
      },
    };
  }));
  if (captured === undefined || captured.weightData === undefined) {
    throw new Error("model serialization produced no weight data");
  }
  const weightData = captured.weightData as ArrayBuffer;
  writeFileSync(path.join(dir, MODEL_FILE), JSON.stringify({
    modelTopology: captured.modelTopology,
    weightSpecs: captured.weightSpecs,
  }));
  writeFileSync(path.join(dir, WEIGHTS_FILE), Buffer.from(weightData));
  const meta: ArtifactMeta = {
    format: ARTIFACT_FORMAT,
    config: configRecord(cfg),
    datasetFingerprint,
    featureColumns: [...FEATURE_COLUMNS],
    targetColumns: [...TARGET_COLUMNS],
    scalers,
  };
  writeFileSync(path.join(dir, TRAINER_FILE), JSON.stringify(meta, null, 2) + "\n");
}

function checkScalers(scalers: unknown, dir: string): UserScalers[] {
  if (!Array.isArray(scalers) || scalers.length === 0) {
    throw new Error(`${dir}: model artifact has no scaler statistics`);
  }
  for (const s of scalers as UserScalers[]) {
    if (s.features?.mean?.length !== N_FEATURES
        || s.features?.std?.length !== N_FEATURES
        || s.targets?.mean?.length !== N_TARGETS
        || s.targets?.std?.length !== N_TARGETS) {
      throw new Error(`${dir}: model artifact scaler statistics are malformed`);
    }
  }
  return scalers as UserScalers[];
}

/** Load a model artifact directory written by {@link saveArtifact}. */
export async function loadArtifact(dir: string): Promise<LoadedArtifact> {
  let metaRaw: ArtifactMeta;
  try {
    metaRaw = JSON.parse(readFileSync(path.join(dir, TRAINER_FILE), "utf8"));
  } catch (err) {
    throw new Error(`${dir}: not a model artifact directory (${String(err)})`);
  }
  if (metaRaw.format !== ARTIFACT_FORMAT) {
    throw new Error(
      `${dir}: unsupported artifact format ${JSON.stringify(metaRaw.format)} `
      + `(this build reads ${JSON.stringify(ARTIFACT_FORMAT)})`);
  }
  const cfg = configFromRecord(metaRaw.config);
  const scalers = checkScalers(metaRaw.scalers, dir);
  const modelJson = JSON.parse(readFileSync(path.join(dir, MODEL_FILE), "utf8"));
  const weights = readFileSync(path.join(dir, WEIGHTS_FILE));
  const weightData = weights.buffer.slice(
    weights.byteOffset, weights.byteOffset + weights.byteLength);
  const model = await tf.loadLayersModel(tf.io.fromMemory({
    modelTopology: modelJson.modelTopology,
    weightSpecs: modelJson.weightSpecs,
    weightData,
  }));
  // The artifact stores topology + weights only; recompile so the loaded
  // model supports evaluate() as well as predict().
  model.compile({
    optimizer: makeOptimizer(cfg),
    loss: "meanSquaredError",
  });
  return { model, cfg, meta: { ...metaRaw, scalers } };
}
