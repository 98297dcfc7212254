/**
 * Trainer configuration: a flat key=value file (same shape as the harness
 * scenario config) controlling the windowing, architecture widths, and
 * optimization schedule of the recurrent channel predictor.
 *
 * Defaults are the published operating point: 120-step input windows
 * predicting a 20-step horizon through stacked recurrent layers of widths
 * 128/64 plus a 32-unit gated layer, trained for 15 epochs at batch 32
 * with learning rate 8e-4 on a 3000-point subsample of the exported trace.
 */

export interface TrainerConfig {
  /** Input window length in time steps. */
  window: number;
  /** Prediction horizon in time steps (the output covers all of them). */
  horizon: number;
  /** Width of the first recurrent (LSTM) layer. */
  lstmUnits1: number;
  /** Width of the second recurrent (LSTM) layer. */
  lstmUnits2: number;
  /** Width of the gated recurrent (GRU) layer. */
  gruUnits: number;
  /** Dropout rate applied after the first recurrent block. */
  dropout1: number;
  /** Dropout rate applied after the gated recurrent block. */
  dropout2: number;
  /** Width of the dense layer before the linear output. */
  denseUnits: number;
  /** Adam learning rate. */
  learningRate: number;
  /** Mini-batch size. */
  batchSize: number;
  /** Training epochs. */
  epochs: number;
  /** Use at most this many leading time steps of the exported trace. */
  subsamplePoints: number;
  /** Fraction of the subsample (by time) used for training; the remainder
   *  validates. The split is contiguous, never shuffled across time. */
  trainFraction: number;
  /** Step between consecutive training window starts (1 = every window). */
  stride: number;
  /** Step between consecutive prediction window starts. */
  predictStride: number;
  /** Seed for weight initialization, dropout masks, and batch order. */
  seed: number;
}

export const DEFAULT_CONFIG: TrainerConfig = {
  window: 120,
  horizon: 20,
  lstmUnits1: 128,
  lstmUnits2: 64,
  gruUnits: 32,
  dropout1: 0.2,
  dropout2: 0.3,
  denseUnits: 50,
  learningRate: 0.0008,
  batchSize: 32,
  epochs: 15,
  subsamplePoints: 3000,
  trainFraction: 0.8,
  stride: 1,
  predictStride: 1,
  seed: 20260825,
};

/** Config-file key for each field, in canonical order. */
const KEYS: ReadonlyArray<[string, keyof TrainerConfig, "int" | "float"]> = [
  ["window", "window", "int"],
  ["horizon", "horizon", "int"],
  ["lstm_units_1", "lstmUnits1", "int"],
  ["lstm_units_2", "lstmUnits2", "int"],
  ["gru_units", "gruUnits", "int"],
  ["dropout_1", "dropout1", "float"],
  ["dropout_2", "dropout2", "float"],
  ["dense_units", "denseUnits", "int"],
  ["learning_rate", "learningRate", "float"],
  ["batch_size", "batchSize", "int"],
  ["epochs", "epochs", "int"],
  ["subsample_points", "subsamplePoints", "int"],
  ["train_fraction", "trainFraction", "float"],
  ["stride", "stride", "int"],
  ["predict_stride", "predictStride", "int"],
  ["seed", "seed", "int"],
];

const KEY_TO_FIELD = new Map(KEYS.map(([key, field, kind]) => [key, { field, kind }]));

function parseNumber(key: string, raw: string, kind: "int" | "float",
                     where: string): number {
  const text = raw.trim();
  const value = Number(text);
  if (text === "" || !Number.isFinite(value)) {
    throw new Error(`${where}: invalid value ${JSON.stringify(raw.trim())} for ${key}`);
  }
  if (kind === "int" && !Number.isInteger(value)) {
    throw new Error(`${where}: ${key} must be an integer, got ${text}`);
  }
  return value;
}

/** Parse `key=value` lines (# comments, blank lines allowed) over a base
 *  config. Unknown keys and malformed lines are rejected with the source
 *  location. */
export function parseConfigText(text: string, source = "<config>",
                                base: TrainerConfig = DEFAULT_CONFIG): TrainerConfig {
  const cfg: TrainerConfig = { ...base };
  const lines = text.split(/\r?\n/);
  for (let i = 0; i < lines.length; i++) {
    const where = `${source}:${i + 1}`;
    const stripped = lines[i].replace(/#.*$/, "").trim();
    if (stripped === "") continue;
    const eq = stripped.indexOf("=");
    if (eq < 0) {
      throw new Error(`${where}: expected KEY=VALUE, got ${JSON.stringify(stripped)}`);
    }
    const key = stripped.slice(0, eq).trim();
    const raw = stripped.slice(eq + 1);
    const entry = KEY_TO_FIELD.get(key);
    if (entry === undefined) {
      throw new Error(`${where}: unknown config key ${JSON.stringify(key)}`);
    }
    (cfg[entry.field] as number) = parseNumber(key, raw, entry.kind, where);
  }
  return cfg;
}

/** Apply `KEY=VALUE` override strings (e.g. from --set flags). */
export function applyOverrides(cfg: TrainerConfig,
                               pairs: readonly string[]): TrainerConfig {
  const out: TrainerConfig = { ...cfg };
  for (const pair of pairs) {
    const eq = pair.indexOf("=");
    if (eq < 0) {
      throw new Error(`override must look like KEY=VALUE, got ${JSON.stringify(pair)}`);
    }
    const key = pair.slice(0, eq).trim();
    const entry = KEY_TO_FIELD.get(key);
    if (entry === undefined) {
      throw new Error(`unknown config key ${JSON.stringify(key)}`);
    }
    (out[entry.field] as number) = parseNumber(key, pair.slice(eq + 1),
                                               entry.kind, "--set");
  }
  return out;
}

/** Render the canonical key=value form (stable key order). */
export function configText(cfg: TrainerConfig): string {
  return KEYS.map(([key, field]) => `${key}=${cfg[field]}`).join("\n") + "\n";
}

/** Plain snake_case object for artifact metadata. */
export function configRecord(cfg: TrainerConfig): Record<string, number> {
  return Object.fromEntries(KEYS.map(([key, field]) => [key, cfg[field]]));
}

export function configFromRecord(record: Record<string, unknown>): TrainerConfig {
  const cfg: TrainerConfig = { ...DEFAULT_CONFIG };
  for (const [key, value] of Object.entries(record)) {
    const entry = KEY_TO_FIELD.get(key);
    if (entry === undefined) {
      throw new Error(`unknown config key ${JSON.stringify(key)} in model metadata`);
    }
    if (typeof value !== "number" || !Number.isFinite(value)) {
      throw new Error(`invalid value for ${key} in model metadata`);
    }
    (cfg[entry.field] as number) = value;
  }
  return validateConfig(cfg);
}

/** Range-check every field; returns the config for chaining. */
export function validateConfig(cfg: TrainerConfig): TrainerConfig {
  const positiveInts: Array<[string, number]> = [
    ["window", cfg.window],
    ["horizon", cfg.horizon],
    ["lstm_units_1", cfg.lstmUnits1],
    ["lstm_units_2", cfg.lstmUnits2],
    ["gru_units", cfg.gruUnits],
    ["dense_units", cfg.denseUnits],
    ["batch_size", cfg.batchSize],
    ["epochs", cfg.epochs],
    ["stride", cfg.stride],
    ["predict_stride", cfg.predictStride],
  ];
  for (const [key, value] of positiveInts) {
    if (!Number.isInteger(value) || value < 1) {
      throw new Error(`${key} must be an integer >= 1, got ${value}`);
    }
  }
  for (const [key, value] of [["dropout_1", cfg.dropout1],
                              ["dropout_2", cfg.dropout2]] as const) {
    if (!(value >= 0 && value < 1)) {
      throw new Error(`${key} must be in [0, 1), got ${value}`);
    }
  }
  if (!(cfg.learningRate > 0)) {
    throw new Error(`learning_rate must be > 0, got ${cfg.learningRate}`);
  }
  if (!(cfg.trainFraction > 0 && cfg.trainFraction < 1)) {
    throw new Error(`train_fraction must be in (0, 1), got ${cfg.trainFraction}`);
  }
  if (!Number.isInteger(cfg.subsamplePoints)
      || cfg.subsamplePoints < cfg.window + cfg.horizon) {
    throw new Error(
      `subsample_points must be an integer >= window + horizon `
      + `(${cfg.window + cfg.horizon}), got ${cfg.subsamplePoints}`);
  }
  if (!Number.isInteger(cfg.seed) || cfg.seed < 0) {
    throw new Error(`seed must be a non-negative integer, got ${cfg.seed}`);
  }
  return cfg;
}
