/// <reference types="vitest/config" />
import { defineConfig } from "vite";

// base "./" so the bundle works when the API server mounts dist/ at any path
export default defineConfig({
  base: "./",
  build: {
    outDir: "dist",
    target: "es2022",
    sourcemap: false,
  },
  server: {
    // dev-mode convenience: forward API calls to a locally running server
    proxy: {
      "/api": "http://127.0.0.1:8808",
    },
  },
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    // the end-to-end file drives a real server with wall-clock latency
    // budgets, so test files must not compete for the CPU
    fileParallelism: false,
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
