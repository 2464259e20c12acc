/** Round progress panel: labels-remaining counter, accuracy trend, and the
 * operator's Advance Round control.
 *
 * Every displayed number comes straight from GET /round and GET /metrics;
 * the advance button is enabled only when the service reports zero pending
 * labels, and an unreachable service shows an offline banner with the
 * control locked.
 */

import { ApiError, ServiceClient } from "./api.js";
import type { RoundInfo, RoundRecord } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const CHART_WIDTH = 420;
const CHART_HEIGHT = 160;
const MARGIN = 24;

export function buildAccuracyChart(records: RoundRecord[]): SVGSVGElement {
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("class", "accuracy-chart");
  svg.setAttribute("viewBox", `0 0 ${CHART_WIDTH} ${CHART_HEIGHT}`);

  const points = records
    .filter((r) => r.test_accuracy !== null)
    .map((r) => ({ t: r.t, accuracy: r.test_accuracy as number }));
  if (points.length === 0) return svg;

  const tMax = Math.max(1, ...points.map((p) => p.t));
  const x = (t: number) => MARGIN + (t / tMax) * (CHART_WIDTH - 2 * MARGIN);
  const y = (a: number) => CHART_HEIGHT - MARGIN - a * (CHART_HEIGHT - 2 * MARGIN);

  const axis = document.createElementNS(SVG_NS, "polyline");
  axis.setAttribute("class", "axis");
  axis.setAttribute(
    "points",
    `${MARGIN},${MARGIN} ${MARGIN},${CHART_HEIGHT - MARGIN} ${CHART_WIDTH - MARGIN},${CHART_HEIGHT - MARGIN}`,
  );
  axis.setAttribute("fill", "none");
  svg.appendChild(axis);

  const line = document.createElementNS(SVG_NS, "polyline");
  line.setAttribute("class", "trend");
  line.setAttribute("fill", "none");
  line.setAttribute(
    "points",
    points.map((p) => `${x(p.t).toFixed(1)},${y(p.accuracy).toFixed(1)}`).join(" "),
  );
  svg.appendChild(line);

  for (const point of points) {
    const dot = document.createElementNS(SVG_NS, "circle");
    dot.setAttribute("class", "point");
    dot.setAttribute("cx", x(point.t).toFixed(1));
    dot.setAttribute("cy", y(point.accuracy).toFixed(1));
    dot.setAttribute("r", "3");
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = `round ${point.t}: ${(point.accuracy * 100).toFixed(1)}%`;
    dot.appendChild(title);
    svg.appendChild(dot);
  }
  return svg;
}

export class RoundDashboard {
  readonly root: HTMLElement;
  private readonly client: ServiceClient;
  private readonly onAdvanced: () => void;
  private round: RoundInfo | null = null;
  private records: RoundRecord[] = [];
  private offline = false;
  private notice: string | null = null;

  constructor(client: ServiceClient, root: HTMLElement, onAdvanced: () => void = () => {}) {
    this.client = client;
    this.root = root;
    this.onAdvanced = onAdvanced;
  }

  async refresh(): Promise<void> {
    try {
      const [round, records] = await Promise.all([
        this.client.getRound(),
        this.client.getMetrics(),
      ]);
      this.round = round;
      this.records = records;
      this.offline = false;
    } catch {
      // no stale advance: the control locks whenever the service is unreachable
      this.offline = true;
      this.round = null;
    }
    this.render();
  }

  private async advance(): Promise<void> {
    try {
      const result = await this.client.advanceRound();
      this.notice = `Round ${result.completed_round} trained; now at round ${result.t}.`;
      this.onAdvanced();
    } catch (error) {
      if (error instanceof ApiError && typeof error.body["remaining"] === "number") {
        this.notice = `Cannot advance: ${error.body["remaining"]} labels still pending.`;
      } else if (error instanceof ApiError) {
        this.notice = `Cannot advance: ${String(error.body["error"] ?? error.status)}`;
      } else {
        this.notice = "Cannot reach the annotation service.";
      }
    }
    await this.refresh();
  }

  render(): void {
    this.root.textContent = "";
    this.root.classList.add("round-dashboard");

    if (this.offline) {
      const banner = document.createElement("div");
      banner.className = "banner banner-offline";
      banner.textContent = "Service unreachable — progress shown may be stale";
      this.root.appendChild(banner);
    }

    const status = document.createElement("div");
    status.className = "round-status";
    if (this.round) {
      const phase =
        this.round.state === "completed"
          ? "experiment complete"
          : `round ${this.round.t + 1} of ${this.round.T} awaiting labels`;
      status.textContent =
        `${phase} — ${this.round.pending} of ${this.round.batch_size} remaining, ` +
        `${this.round.labeled_total} labeled total`;
      status.dataset.remaining = String(this.round.pending);
    } else {
      status.textContent = "No round information.";
    }
    this.root.appendChild(status);

    if (this.notice) {
      const note = document.createElement("div");
      note.className = "notice";
      note.textContent = this.notice;
      this.root.appendChild(note);
    }

    const advance = document.createElement("button");
    advance.className = "advance-button";
    advance.textContent = "Advance Round";
    advance.disabled =
      this.offline ||
      this.round === null ||
      this.round.state !== "awaiting_labels" ||
      this.round.pending !== 0;
    advance.addEventListener("click", () => void this.advance());
    this.root.appendChild(advance);

    this.root.appendChild(buildAccuracyChart(this.records));
  }
}
