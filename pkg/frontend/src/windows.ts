/**
 * Sliding-window tensor construction with a leakage-free contiguous split.
 *
 * A window starting at step s consumes features over [s, s+window) and
 * predicts the target channels over [s+window, s+window+horizon). The
 * first `trainFraction` of the (subsampled) timeline trains, the rest
 * validates; a window belongs to the training set only when every index
 * it touches (inputs and targets) lies before the split step, and to the
 * validation set only when its start lies at or after the split. Windows
 * that would straddle the boundary are dropped, so no information crosses
 * it in either direction.
 *
 * Features and targets are standardized per user with statistics taken
 * from the training segment only; the fitted scalers travel with the
 * model artifact so predictions can be mapped back to channel units.
 */

import type { Dataset } from "./datafile.js";
import { N_FEATURES, N_TARGETS } from "./datafile.js";
import type { TrainerConfig } from "./config.js";

/** Per-dimension affine normalizer: y = (x - mean) / std. */
export interface Scaler {
  mean: number[];
  std: number[];
}

/** Standardization statistics for one user (features and targets). */
export interface UserScalers {
  features: Scaler;
  targets: Scaler;
}

/** Index bookkeeping for the contiguous split (all step indices are
 *  relative to the subsampled timeline). */
export interface WindowPlan {
  /** Steps actually used from the trace (first `subsamplePoints`). */
  nSteps: number;
  /** First validation step; training windows end strictly before it. */
  split: number;
  /** Training window start indices (per user; users share the grid). */
  trainStarts: number[];
  /** Validation window start indices. */
  valStarts: number[];
}

/** Flat float32 window arrays for one split, pooled across users. */
export interface WindowArrays {
  /** [n, window, N_FEATURES] row-major. */
  xs: Float32Array;
  /** [n, horizon, N_TARGETS] row-major. */
  ys: Float32Array;
  n: number;
}

export interface TrainingArrays {
  plan: WindowPlan;
  scalers: UserScalers[];
  train: WindowArrays;
  val: WindowArrays;
}

/** Deterministic 32-bit PRNG (mulberry32) for batch-order shuffling. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function shuffled<T>(items: readonly T[], rand: () => number): T[] {
  const out = items.slice();
  for (let i = out.length - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [out[i], out[j]] = [out[j], out[i]];
  }
  return out;
}

/** Build the split bookkeeping for a trace of `totalSteps` steps. */
export function planWindows(cfg: TrainerConfig, totalSteps: number): WindowPlan {
  const nSteps = Math.min(totalSteps, cfg.subsamplePoints);
  const span = cfg.window + cfg.horizon;
  if (nSteps < span) {
    throw new Error(
      `dataset provides ${nSteps} usable time steps per user but one window `
      + `needs window + horizon = ${span}`);
  }
  const split = Math.floor(nSteps * cfg.trainFraction);
  const trainStarts: number[] = [];
  for (let s = 0; s + span <= split; s += cfg.stride) trainStarts.push(s);
  const valStarts: number[] = [];
  for (let s = split; s + span <= nSteps; s += cfg.stride) valStarts.push(s);
  return { nSteps, split, trainStarts, valStarts };
}

function fitScaler(data: Float64Array, width: number, steps: number): Scaler {
  const mean = new Array<number>(width).fill(0);
  const std = new Array<number>(width).fill(0);
  const min = new Array<number>(width).fill(Infinity);
  const max = new Array<number>(width).fill(-Infinity);
  for (let t = 0; t < steps; t++) {
    for (let d = 0; d < width; d++) {
      const v = data[t * width + d];
      mean[d] += v;
      if (v < min[d]) min[d] = v;
      if (v > max[d]) max[d] = v;
    }
  }
  for (let d = 0; d < width; d++) mean[d] /= steps;
  for (let t = 0; t < steps; t++) {
    for (let d = 0; d < width; d++) {
      const delta = data[t * width + d] - mean[d];
      std[d] += delta * delta;
    }
  }
  for (let d = 0; d < width; d++) {
    std[d] = Math.sqrt(std[d] / steps);
    if (min[d] === max[d]) {
      // Exactly-constant dimensions (e.g. the fixed power share) must
      // standardize to exactly 0, not to the rounding error of the mean:
      // residual ~1e-16 values produce machine-noise gradients that still
      // perturb the optimizer away from an already-exact fit.
      mean[d] = min[d];
      std[d] = 1.0;
    } else if (std[d] < 1e-12) {
      // Near-constant dimensions: avoid dividing by ~0.
      std[d] = 1.0;
    }
  }
  return { mean, std };
}

/** Fit per-user scalers on the training segment [0, split) only. */
export function fitScalers(dataset: Dataset, plan: WindowPlan): UserScalers[] {
  if (plan.split < 1) {
    throw new Error("training segment is empty; raise train_fraction or add data");
  }
  return dataset.users.map((user) => ({
    features: fitScaler(user.features, N_FEATURES, plan.split),
    targets: fitScaler(user.targets, N_TARGETS, plan.split),
  }));
}

function fillWindow(xs: Float32Array, xOffset: number, ys: Float32Array,
                    yOffset: number, dataset: Dataset, user: number,
                    start: number, cfg: TrainerConfig, scaler: UserScalers): void {
  const { features, targets } = dataset.users[user];
  const fm = scaler.features.mean;
  const fs = scaler.features.std;
  for (let i = 0; i < cfg.window; i++) {
    const t = start + i;
    for (let f = 0; f < N_FEATURES; f++) {
      xs[xOffset + i * N_FEATURES + f] =
        (features[t * N_FEATURES + f] - fm[f]) / fs[f];
    }
  }
  const tm = scaler.targets.mean;
  const ts = scaler.targets.std;
  for (let i = 0; i < cfg.horizon; i++) {
    const t = start + cfg.window + i;
    for (let c = 0; c < N_TARGETS; c++) {
      ys[yOffset + i * N_TARGETS + c] =
        (targets[t * N_TARGETS + c] - tm[c]) / ts[c];
    }
  }
}

function buildSplit(dataset: Dataset, cfg: TrainerConfig, scalers: UserScalers[],
                    order: ReadonlyArray<[number, number]>): WindowArrays {
  const n = order.length;
  const xs = new Float32Array(n * cfg.window * N_FEATURES);
  const ys = new Float32Array(n * cfg.horizon * N_TARGETS);
  const xStride = cfg.window * N_FEATURES;
  const yStride = cfg.horizon * N_TARGETS;
  order.forEach(([user, start], row) => {
    fillWindow(xs, row * xStride, ys, row * yStride, dataset, user, start,
               cfg, scalers[user]);
  });
  return { xs, ys, n };
}

/** Construct standardized training/validation arrays pooled across users.
 *  Training windows are shuffled with the config seed (validation keeps
 *  user-major time order). */
export function buildTrainingArrays(dataset: Dataset,
                                    cfg: TrainerConfig): TrainingArrays {
  const plan = planWindows(cfg, dataset.nSteps);
  const scalers = fitScalers(dataset, plan);
  const trainOrder: Array<[number, number]> = [];
  const valOrder: Array<[number, number]> = [];
  for (let u = 0; u < dataset.nUsers; u++) {
    for (const s of plan.trainStarts) trainOrder.push([u, s]);
    for (const s of plan.valStarts) valOrder.push([u, s]);
  }
  const rand = mulberry32(cfg.seed);
  return {
    plan,
    scalers,
    train: buildSplit(dataset, cfg, scalers, shuffled(trainOrder, rand)),
    val: buildSplit(dataset, cfg, scalers, valOrder),
  };
}

/** One row of a prediction request: window [start, start+window) of `user`
 *  predicting through `trial` = start + window + horizon - 1 (the full-
 *  horizon step, which is what the emitted file reports). */
export interface PredictionRowSpec {
  user: number;
  start: number;
  trial: number;
}

export interface PredictionArrays {
  xs: Float32Array;
  rows: PredictionRowSpec[];
}

/** Standardized windows over the whole trace for inference. Windows step
 *  by `stride` per user; `limit` caps the window count per user. */
export function buildPredictionArrays(dataset: Dataset, cfg: TrainerConfig,
                                      scalers: UserScalers[], stride: number,
                                      limit?: number): PredictionArrays {
  if (!Number.isInteger(stride) || stride < 1) {
    throw new Error(`prediction stride must be an integer >= 1, got ${stride}`);
  }
  const span = cfg.window + cfg.horizon;
  if (dataset.nSteps < span) {
    throw new Error(
      `dataset provides ${dataset.nSteps} time steps per user but one window `
      + `needs window + horizon = ${span}`);
  }
  const rows: PredictionRowSpec[] = [];
  for (let u = 0; u < dataset.nUsers; u++) {
    let taken = 0;
    for (let s = 0; s + span <= dataset.nSteps; s += stride) {
      if (limit !== undefined && taken >= limit) break;
      rows.push({ user: u, start: s, trial: s + span - 1 });
      taken++;
    }
  }
  const xs = new Float32Array(rows.length * cfg.window * N_FEATURES);
  const xStride = cfg.window * N_FEATURES;
  const ysScratch = new Float32Array(cfg.horizon * N_TARGETS);
  rows.forEach((row, i) => {
    fillWindow(xs, i * xStride, ysScratch, 0, dataset, row.user, row.start,
               cfg, scalers[row.user]);
  });
  return { xs, rows };
}
