import { ComposerApi } from "./api.js";
import { mountComposer } from "./ui.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "http://127.0.0.1:8077";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
mountComposer(root, new ComposerApi(base));
