/**
 * Training driver: loads an exported trace, builds leakage-free window
 * tensors, fits the recurrent predictor, and writes a self-contained
 * model artifact plus a loss-curve report.
 */

import * as tf from "@tensorflow/tfjs";

import type { TrainerConfig } from "./config.js";
import { validateConfig } from "./config.js";
import type { Dataset } from "./datafile.js";
import { loadDataset, N_FEATURES, N_TARGETS } from "./datafile.js";
import { saveArtifact } from "./model.js";
import { buildModel } from "./model.js";
import type { TrainingArrays, WindowArrays } from "./windows.js";
import { buildTrainingArrays } from "./windows.js";

export interface TrainReport {
  /** Epochs actually run (= configured epochs unless training aborted). */
  epochs: number;
  /** Per-epoch training loss (standardized-target MSE). */
  trainLoss: number[];
  /** Per-epoch validation loss. */
  valLoss: number[];
  /** Where the model artifact was written. */
  modelDir: string;
  /** Fingerprint of the dataset the model was trained on. */
  datasetFingerprint: string;
  trainWindows: number;
  valWindows: number;
  /** First validation time step of the contiguous split. */
  split: number;
}

export interface FitResult {
  model: tf.Sequential;
  trainLoss: number[];
  valLoss: number[];
}

function toTensors(arrays: WindowArrays, cfg: TrainerConfig):
    [tf.Tensor3D, tf.Tensor3D] {
  return [
    tf.tensor3d(arrays.xs, [arrays.n, cfg.window, N_FEATURES]),
    tf.tensor3d(arrays.ys, [arrays.n, cfg.horizon, N_TARGETS]),
  ];
}

/** Fit a fresh model on prepared window arrays. Aborts with the 1-based
 *  epoch index if the training loss ever goes non-finite. */
export async function fitArrays(cfg: TrainerConfig,
                                arrays: TrainingArrays): Promise<FitResult> {
  if (arrays.train.n === 0) {
    throw new Error(
      "training split has no complete windows; lower window/horizon or "
      + "raise subsample_points");
  }
  if (arrays.val.n === 0) {
    throw new Error(
      "validation split has no complete windows; lower window/horizon or "
      + "lower train_fraction");
  }
  const model = buildModel(cfg);
  const [xsTrain, ysTrain] = toTensors(arrays.train, cfg);
  const [xsVal, ysVal] = toTensors(arrays.val, cfg);
  let nanEpoch = 0;
  try {
    const history = await model.fit(xsTrain, ysTrain, {
      batchSize: cfg.batchSize,
      epochs: cfg.epochs,
      shuffle: false, // window order is already seed-shuffled
      verbose: 0,
      validationData: [xsVal, ysVal],
      callbacks: {
        onEpochEnd: (epoch, logs) => {
          if (logs && !Number.isFinite(logs.loss)) {
            nanEpoch = epoch + 1;
            model.stopTraining = true;
          }
        },
      },
    });
    if (nanEpoch > 0) {
      model.dispose();
      throw new Error(
        `training aborted: loss became non-finite (NaN) at epoch ${nanEpoch}`);
    }
    return {
      model,
      trainLoss: (history.history.loss as number[]).map(Number),
      valLoss: (history.history.val_loss as number[]).map(Number),
    };
  } finally {
    xsTrain.dispose();
    ysTrain.dispose();
    xsVal.dispose();
    ysVal.dispose();
  }
}

/** Train on a loaded dataset and write the artifact to `modelDir`. */
export async function trainDataset(dataset: Dataset, cfg: TrainerConfig,
                                   modelDir: string): Promise<TrainReport> {
  validateConfig(cfg);
  const arrays = buildTrainingArrays(dataset, cfg);
  const { model, trainLoss, valLoss } = await fitArrays(cfg, arrays);
  try {
    await saveArtifact(modelDir, model, cfg, arrays.scalers,
                       dataset.fingerprint);
  } finally {
    model.dispose();
  }
  return {
    epochs: trainLoss.length,
    trainLoss,
    valLoss,
    modelDir,
    datasetFingerprint: dataset.fingerprint,
    trainWindows: arrays.train.n,
    valWindows: arrays.val.n,
    split: arrays.plan.split,
  };
}

/** Convenience wrapper: load the CSV, train, save. */
export async function train(datasetPath: string, cfg: TrainerConfig,
                            modelDir: string): Promise<TrainReport> {
  return trainDataset(loadDataset(datasetPath), cfg, modelDir);
}
