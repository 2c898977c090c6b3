import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    environment: 'jsdom',
    // the live round-trip test boots the Python rating service
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
