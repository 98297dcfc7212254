/**
 * Loader for the temporal trace CSV exported by the harness
 * (`goldnoma export-dataset`). Each row holds one (time_step, user) pair:
 * the true channel gain, the per-user power share, the recovered symbol,
 * and the raw despread channel estimate. The loader validates the schema
 * column by column, regroups rows into dense per-user series, and resolves
 * the dataset fingerprint from the JSON sidecar the harness writes next to
 * the CSV (falling back to a content hash for bare files).
 */

import { createHash } from "node:crypto";
import { existsSync, readFileSync } from "node:fs";
import path from "node:path";

export const DATASET_COLUMNS = [
  "time_step",
  "user_id",
  "h_real",
  "h_imag",
  "phi",
  "x_hat_real",
  "x_hat_imag",
  "h_raw_real",
  "h_raw_imag",
] as const;

/** Input features per time step, in model order. */
export const FEATURE_COLUMNS = [
  "h_raw_real",
  "h_raw_imag",
  "phi",
  "x_hat_real",
  "x_hat_imag",
] as const;

/** Regression target per time step: the true complex gain as two channels. */
export const TARGET_COLUMNS = ["h_real", "h_imag"] as const;

export const N_FEATURES = FEATURE_COLUMNS.length;
export const N_TARGETS = TARGET_COLUMNS.length;

/** One user's dense time series, step index 0..nSteps-1. */
export interface UserSeries {
  /** features[t * N_FEATURES + f], model feature order. */
  features: Float64Array;
  /** targets[t * N_TARGETS + c], (real, imag). */
  targets: Float64Array;
}

export interface Dataset {
  source: string;
  nSteps: number;
  nUsers: number;
  users: UserSeries[];
  /** Sidecar fingerprint when available, else sha256 of the CSV bytes. */
  fingerprint: string;
}

function checkHeader(fields: string[], source: string): void {
  const expected = DATASET_COLUMNS;
  const n = Math.min(fields.length, expected.length);
  for (let i = 0; i < n; i++) {
    if (fields[i] !== expected[i]) {
      throw new Error(
        `${source}: dataset schema mismatch at column ${i + 1}: `
        + `expected "${expected[i]}", found "${fields[i]}"`);
    }
  }
  if (fields.length < expected.length) {
    throw new Error(
      `${source}: dataset schema mismatch: missing column "${expected[fields.length]}"`);
  }
  if (fields.length > expected.length) {
    throw new Error(
      `${source}: dataset schema mismatch: unexpected column "${fields[expected.length]}"`);
  }
}

function parseCell(raw: string, column: string, where: string): number {
  const value = Number(raw.trim());
  if (raw.trim() === "" || Number.isNaN(value)) {
    throw new Error(
      `${where}: invalid value ${JSON.stringify(raw)} for column "${column}"`);
  }
  return value;
}

/** Parse the CSV text into dense per-user series. */
export function parseDataset(text: string, source = "<dataset>",
                             fingerprint?: string): Dataset {
  const lines = text.split(/\r?\n/);
  if (lines.length > 0 && lines[lines.length - 1] === "") lines.pop();
  if (lines.length === 0) {
    throw new Error(`${source}: dataset is empty`);
  }
  checkHeader(lines[0].split(","), source);

  interface Row { t: number; u: number; values: number[] }
  const rows: Row[] = [];
  let maxT = -1;
  let maxU = -1;
  for (let i = 1; i < lines.length; i++) {
    if (lines[i].trim() === "") continue;
    const where = `${source}:${i + 1}`;
    const fields = lines[i].split(",");
    if (fields.length !== DATASET_COLUMNS.length) {
      throw new Error(
        `${where}: expected ${DATASET_COLUMNS.length} fields, got ${fields.length}`);
    }
    const values = fields.map((f, c) => parseCell(f, DATASET_COLUMNS[c], where));
    const t = values[0];
    const u = values[1];
    if (!Number.isInteger(t) || t < 0) {
      throw new Error(`${where}: time_step must be a non-negative integer, got ${fields[0]}`);
    }
    if (!Number.isInteger(u) || u < 0) {
      throw new Error(`${where}: user_id must be a non-negative integer, got ${fields[1]}`);
    }
    rows.push({ t, u, values });
    if (t > maxT) maxT = t;
    if (u > maxU) maxU = u;
  }
  if (rows.length === 0) {
    throw new Error(`${source}: dataset has no data rows`);
  }

  const nSteps = maxT + 1;
  const nUsers = maxU + 1;
  const users: UserSeries[] = Array.from({ length: nUsers }, () => ({
    features: new Float64Array(nSteps * N_FEATURES),
    targets: new Float64Array(nSteps * N_TARGETS),
  }));
  const seen: Uint8Array[] = Array.from({ length: nUsers },
                                        () => new Uint8Array(nSteps));
  const columnIndex = new Map(DATASET_COLUMNS.map((c, i) => [c, i]));
  const featureIdx = FEATURE_COLUMNS.map((c) => columnIndex.get(c)!);
  const targetIdx = TARGET_COLUMNS.map((c) => columnIndex.get(c)!);

  for (const { t, u, values } of rows) {
    if (seen[u][t]) {
      throw new Error(`${source}: duplicate row for time_step ${t}, user ${u}`);
    }
    seen[u][t] = 1;
    for (let f = 0; f < N_FEATURES; f++) {
      users[u].features[t * N_FEATURES + f] = values[featureIdx[f]];
    }
    for (let c = 0; c < N_TARGETS; c++) {
      users[u].targets[t * N_TARGETS + c] = values[targetIdx[c]];
    }
  }
  for (let u = 0; u < nUsers; u++) {
    for (let t = 0; t < nSteps; t++) {
      if (!seen[u][t]) {
        throw new Error(`${source}: user ${u} is missing time_step ${t}`);
      }
    }
  }
  return {
    source,
    nSteps,
    nUsers,
    users,
    fingerprint: fingerprint ?? sha256Hex(text),
  };
}

function sha256Hex(text: string): string {
  return createHash("sha256").update(text).digest("hex");
}

/** Path of the harness sidecar for a result CSV: `<stem>.meta.json`. */
export function sidecarPath(csvPath: string): string {
  const parsed = path.parse(csvPath);
  return path.join(parsed.dir, `${parsed.name}.meta.json`);
}

/** Fingerprint recorded by the harness sidecar, if one sits next to the
 *  CSV; otherwise undefined. */
export function sidecarFingerprint(csvPath: string): string | undefined {
  const metaPath = sidecarPath(csvPath);
  if (!existsSync(metaPath)) return undefined;
  try {
    const meta = JSON.parse(readFileSync(metaPath, "utf8"));
    if (typeof meta.fingerprint === "string") return meta.fingerprint;
  } catch {
    return undefined;
  }
  return undefined;
}

/** Load a dataset CSV from disk, resolving the fingerprint from the
 *  sidecar when present and the file contents otherwise. */
export function loadDataset(csvPath: string): Dataset {
  const text = readFileSync(csvPath, "utf8");
  return parseDataset(text, csvPath, sidecarFingerprint(csvPath));
}
