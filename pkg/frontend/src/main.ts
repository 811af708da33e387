/**
 * Browser entry point. The API base comes from the `api` query parameter
 * (e.g. index.html?api=http://127.0.0.1:8400) and defaults to the page's
 * own origin for the case where the service hosts the console.
 */

import { ConsoleApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const apiBase = params.get("api") ?? window.location.origin;
const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
const app = new ConsoleApp(root, apiBase);
void app.start();
