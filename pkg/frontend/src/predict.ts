/**
 * Inference driver: loads a model artifact and a dataset export, checks
 * that the dataset is the one the model was trained on (fingerprint
 * match), and emits the prediction CSV consumed by the harness
 * (`goldnoma cpf-eval --predictions`).
 *
 * Each emitted row is one window's full-horizon prediction: the window
 * covering steps [s, s+window) predicts through step
 * t = s + window + horizon - 1, and the row reports that step's complex
 * gain as `trial,user,h_pred_real,h_pred_imag` with trial = t. Rows are
 * emitted user-major in time order; consecutive windows step by the
 * prediction stride.
 */

import * as tf from "@tensorflow/tfjs";
import { mkdirSync, writeFileSync } from "node:fs";
import path from "node:path";

import type { Dataset } from "./datafile.js";
import { loadDataset, N_FEATURES, N_TARGETS } from "./datafile.js";
import type { LoadedArtifact } from "./model.js";
import { loadArtifact } from "./model.js";
import { buildPredictionArrays } from "./windows.js";

export const PREDICTION_HEADER = "trial,user,h_pred_real,h_pred_imag";

export interface PredictOptions {
  /** Steps between consecutive window starts (default: config value). */
  stride?: number;
  /** Cap on windows per user (default: every complete window). */
  limit?: number;
}

export interface PredictionRow {
  trial: number;
  user: number;
  hPredReal: number;
  hPredImag: number;
}

/** Run the model over the dataset and return prediction rows (one per
 *  requested window). */
export function predictRows(artifact: LoadedArtifact, dataset: Dataset,
                            options: PredictOptions = {}): PredictionRow[] {
  const { model, cfg, meta } = artifact;
  if (dataset.fingerprint !== meta.datasetFingerprint) {
    throw new Error(
      `dataset fingerprint ${dataset.fingerprint} does not match the model `
      + `artifact (trained on ${meta.datasetFingerprint}); predictions are `
      + `only meaningful for the trace the model was trained on`);
  }
  if (dataset.nUsers > meta.scalers.length) {
    throw new Error(
      `dataset has ${dataset.nUsers} users but the model artifact carries `
      + `scalers for ${meta.scalers.length}`);
  }
  const stride = options.stride ?? cfg.predictStride;
  const { xs, rows } = buildPredictionArrays(dataset, cfg, meta.scalers,
                                             stride, options.limit);
  const out: PredictionRow[] = [];
  const input = tf.tensor3d(xs, [rows.length, cfg.window, N_FEATURES]);
  try {
    const pred = model.predict(input, { batchSize: 512 }) as tf.Tensor;
    const values = pred.dataSync();
    pred.dispose();
    const perWindow = cfg.horizon * N_TARGETS;
    const last = (cfg.horizon - 1) * N_TARGETS;
    rows.forEach((spec, i) => {
      const scaler = meta.scalers[spec.user].targets;
      const re = values[i * perWindow + last] * scaler.std[0] + scaler.mean[0];
      const im = values[i * perWindow + last + 1] * scaler.std[1] + scaler.mean[1];
      if (!Number.isFinite(re) || !Number.isFinite(im)) {
        throw new Error(
          `model produced a non-finite prediction for trial ${spec.trial}, `
          + `user ${spec.user}`);
      }
      out.push({ trial: spec.trial, user: spec.user, hPredReal: re, hPredImag: im });
    });
  } finally {
    input.dispose();
  }
  return out;
}

export function predictionCsvText(rows: readonly PredictionRow[]): string {
  const lines = [PREDICTION_HEADER];
  for (const r of rows) {
    lines.push(`${r.trial},${r.user},${r.hPredReal},${r.hPredImag}`);
  }
  return lines.join("\n") + "\n";
}

/** Load artifact + dataset, predict, and write the CSV. The dataset is
 *  validated (including the empty case) before anything is written. */
export async function predict(modelDir: string, datasetPath: string,
                              outPath: string,
                              options: PredictOptions = {}): Promise<PredictionRow[]> {
  const artifact = await loadArtifact(modelDir);
  try {
    const dataset = loadDataset(datasetPath);
    const rows = predictRows(artifact, dataset, options);
    mkdirSync(path.dirname(path.resolve(outPath)), { recursive: true });
    writeFileSync(outPath, predictionCsvText(rows));
    return rows;
  } finally {
    artifact.model.dispose();
  }
}
