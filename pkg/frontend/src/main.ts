import { setBaseUrl } from "./api.js";
import { startRouter } from "./router.js";

declare global {
  interface Window {
    PSMW_API_BASE?: string;
  }
}

const root = document.getElementById("app");
if (root) {
  setBaseUrl(window.PSMW_API_BASE ?? "");
  startRouter(root);
}
