import { configureApi } from "./api.js";
import { createApp } from "./app.js";

const root = document.getElementById("app");
if (root) {
  configureApi(document.body.dataset.api ?? "");
  void createApp(root).init();
}
