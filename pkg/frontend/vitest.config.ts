import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    testTimeout: 20000,
    hookTimeout: 30000,
    // The e2e suite drives one shared host process; keep files sequential.
    fileParallelism: false,
  },
});
