import { defineConfig } from "vite";

export default defineConfig({
  server: {
    port: 5173,
    proxy: {
      "/api": "http://127.0.0.1:8990",
    },
  },
  test: {
    environment: "node",
    include: ["src/**/*.test.ts"],
  },
});
