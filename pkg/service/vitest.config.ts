import { defineConfig } from 'vitest/config'

export default defineConfig({
  test: {
    include: ['tests/**/*.test.ts'],
    testTimeout: 120_000,
    hookTimeout: 600_000,
    // the model under test is stateful per suite; keep files isolated but serial
    fileParallelism: false,
  },
})
