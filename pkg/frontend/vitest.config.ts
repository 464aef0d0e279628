import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    // timing-sensitive tests (overhead.test.ts) need the machine to
    // themselves; each file also spawns its own core process
    fileParallelism: false,
  },
});
