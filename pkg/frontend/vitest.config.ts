import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    include: ['tests/**/*.test.ts'],
    testTimeout: 20_000,
    hookTimeout: 120_000,
    // the e2e suite spawns one real server; keep files sequential
    fileParallelism: false,
  },
});
