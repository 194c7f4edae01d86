import { ApiClient } from "./api.js";
import { App } from "./app.js";

const apiBase = new URLSearchParams(window.location.search).get("api") ?? "";
const root = document.getElementById("app");
if (root) {
  void new App(root, new ApiClient(apiBase)).start();
}
