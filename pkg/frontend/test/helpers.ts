/** Shared test utilities: synthetic trace generation in the harness export
 *  schema, temp workspaces, and a runner for the installed `goldnoma` CLI. */

import { execFileSync } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import path from "node:path";

import { DATASET_COLUMNS } from "../src/datafile.js";
import { mulberry32 } from "../src/windows.js";

export interface SyntheticOptions {
  steps: number;
  users?: number;
  seed?: number;
  /** Temporal correlation of the complex gain random walk. */
  rho?: number;
  /** Std of the additive error on the raw estimate column. */
  rawNoise?: number;
  /** Per-user amplitude scale (defaults spread users apart). */
  scales?: number[];
}

/** Gaussian pairs from a uniform PRNG (Box-Muller). */
function gaussianPair(rand: () => number): [number, number] {
  const u1 = Math.max(rand(), 1e-12);
  const u2 = rand();
  const r = Math.sqrt(-2 * Math.log(u1));
  return [r * Math.cos(2 * Math.PI * u2), r * Math.sin(2 * Math.PI * u2)];
}

/** Complex AR(1) gain series with a noisy "raw estimate" column, rendered
 *  in the exported-dataset CSV schema. Learnable by construction: the raw
 *  estimate at the end of a window is strongly correlated with the target
 *  a few steps later. */
export function syntheticCsv(options: SyntheticOptions): string {
  const { steps, users = 2, seed = 1234, rho = 0.99, rawNoise = 0.1 } = options;
  const scales = options.scales ?? Array.from({ length: users },
                                              (_, u) => 4.0 / (u + 1));
  const rand = mulberry32(seed);
  const innovation = Math.sqrt(1 - rho * rho);
  const lines = [DATASET_COLUMNS.join(",")];
  const state: Array<[number, number]> = [];
  for (let u = 0; u < users; u++) {
    state.push(gaussianPair(rand));
  }
  for (let t = 0; t < steps; t++) {
    for (let u = 0; u < users; u++) {
      const [gr, gi] = gaussianPair(rand);
      state[u] = [
        rho * state[u][0] + innovation * gr,
        rho * state[u][1] + innovation * gi,
      ];
      const hr = scales[u] * state[u][0];
      const hi = scales[u] * state[u][1];
      const [nr, ni] = gaussianPair(rand);
      const phi = (u + 1) / (users + 1);
      const xHat = rand() < 0.5 ? -1.0 : 1.0;
      lines.push([
        t, u, hr, hi, phi, xHat, 0.0,
        hr + rawNoise * nr, hi + rawNoise * ni,
      ].join(","));
    }
  }
  return lines.join("\n") + "\n";
}

/** Trace where every column is constant per user (the learnable-constant
 *  sanity case: the correct prediction is the constant itself). */
export function constantCsv(steps: number,
                            gains: ReadonlyArray<[number, number]>): string {
  const lines = [DATASET_COLUMNS.join(",")];
  for (let t = 0; t < steps; t++) {
    gains.forEach(([re, im], u) => {
      const phi = (u + 1) / (gains.length + 1);
      lines.push([t, u, re, im, phi, 1.0, 0.0, re, im].join(","));
    });
  }
  return lines.join("\n") + "\n";
}

/** Create a disposable workspace; returns [dir, cleanup]. */
export function tempWorkspace(prefix: string): [string, () => void] {
  const dir = mkdtempSync(path.join(tmpdir(), `${prefix}-`));
  return [dir, () => rmSync(dir, { recursive: true, force: true })];
}

export function writeCsv(dir: string, name: string, text: string): string {
  const p = path.join(dir, name);
  writeFileSync(p, text);
  return p;
}

/** Run the installed harness CLI; raises with its stderr on failure. */
export function runGoldnoma(args: string[]): string {
  return execFileSync("goldnoma", args, { encoding: "utf8" });
}
