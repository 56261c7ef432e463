import { ServiceClient } from "./api.js";
import { Workspace } from "./controller.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("service") ?? "http://127.0.0.1:8080";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");

const workspace = new Workspace(root, new ServiceClient(baseUrl));
void workspace.refreshRuns();
setInterval(() => {
  // Keep state badges fresh while runs execute; cheap read-only poll.
  if (!document.hidden) void workspace.refreshRuns();
}, 3000);
