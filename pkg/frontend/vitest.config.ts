import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // Model training on the pure-JS tensor backend is CPU-bound; the
    // slowest test (the end-to-end acceptance pair) gets its own explicit
    // timeout on top of this default.
    testTimeout: 120_000,
    hookTimeout: 120_000,
    // Tensor ops and the shared temp workspace are not isolated per file;
    // run files sequentially so timing-sensitive tests are stable.
    pool: "forks",
    poolOptions: { forks: { singleFork: true } },
  },
});
