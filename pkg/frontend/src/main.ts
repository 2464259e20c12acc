/** Console bootstrap: wires the queue and dashboard to one service client.
 *
 * Configuration is limited to the service URL and bearer token, taken from
 * the query string (?service=...&token=...) with localStorage fallback.
 */

import { ServiceClient } from "./api.js";
import { RoundDashboard } from "./dashboard.js";
import { AnnotationQueue } from "./queue.js";

const POLL_INTERVAL_MS = 4000;

function readConfig(): { serviceUrl: string; token?: string } {
  const params = new URLSearchParams(window.location.search);
  const serviceUrl =
    params.get("service") ??
    window.localStorage.getItem("actune.service") ??
    "http://127.0.0.1:8787";
  const token =
    params.get("token") ?? window.localStorage.getItem("actune.token") ?? undefined;
  window.localStorage.setItem("actune.service", serviceUrl);
  if (token) window.localStorage.setItem("actune.token", token);
  return { serviceUrl, token };
}

export function mount(root: HTMLElement, client: ServiceClient): {
  queue: AnnotationQueue;
  dashboard: RoundDashboard;
  refresh: () => Promise<void>;
} {
  const dashboardRoot = document.createElement("section");
  const queueRoot = document.createElement("section");
  root.append(dashboardRoot, queueRoot);

  const dashboard = new RoundDashboard(client, dashboardRoot, () => void refresh());
  const queue = new AnnotationQueue(client, queueRoot, {
    onChange: () => void dashboard.refresh(),
  });
  const refresh = async () => {
    await Promise.all([queue.refresh(), dashboard.refresh()]);
  };
  return { queue, dashboard, refresh };
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const { serviceUrl, token } = readConfig();
  const client = new ServiceClient(serviceUrl, { token });
  const { refresh } = mount(document.getElementById("app") as HTMLElement, client);
  void refresh();
  window.setInterval(() => void refresh(), POLL_INTERVAL_MS);
}
