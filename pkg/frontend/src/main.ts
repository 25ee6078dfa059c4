import { ApiClient } from "./api.js";
import { mountApp } from "./dom.js";
import { BrowserHandleStore } from "./session.js";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
// Served by `escaperoom serve --ui`; the API lives on the same origin.
mountApp(root, new ApiClient(""), new BrowserHandleStore());
