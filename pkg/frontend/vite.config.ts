import { defineConfig } from 'vitest/config';

export default defineConfig({
  server: {
    proxy: {
      // during `vite dev`, forward API and socket traffic to a local server
      '/scenes': 'http://127.0.0.1:8000',
      '/sessions': { target: 'http://127.0.0.1:8000', ws: true },
    },
  },
  build: {
    outDir: 'dist',
    sourcemap: true,
  },
  test: {
    environment: 'happy-dom',
    include: ['tests/**/*.test.ts'],
    testTimeout: 30000,
    hookTimeout: 30000,
  },
});
