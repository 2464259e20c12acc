/** Conformance against the real annotation service.
 *
 * Spawns the Python service with a 10-sample batch, mounts the actual queue
 * and dashboard components, and drives them through the DOM: the queue must
 * render all ten tasks, labeling all ten must enable the advance control,
 * and a competing label must surface the committed class on the card.
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync, rmSync, existsSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import { RoundDashboard } from "../src/dashboard.js";
import { AnnotationQueue } from "../src/queue.js";

const PYTHON = process.env.ACTUNE_PYTHON ?? "python3";
const nodeFetch: typeof fetch = (...args) => fetch(...args);

let workDir: string;
let proc: ChildProcess | null = null;
let baseUrl: string;

async function waitForService(infoPath: string, timeoutMs = 60_000): Promise<string> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (proc && proc.exitCode !== null) {
      throw new Error(`service exited with code ${proc.exitCode}`);
    }
    if (existsSync(infoPath)) {
      try {
        const { port } = JSON.parse(readFileSync(infoPath, "utf-8"));
        const url = `http://127.0.0.1:${port}`;
        const health = await nodeFetch(`${url}/health`);
        if (health.ok) return url;
      } catch {
        // not up yet
      }
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error("annotation service did not come up");
}

async function flush(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 50));
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "actune-ui-"));
  const dataDir = join(workDir, "data");
  const made = spawnSync(
    PYTHON,
    [
      "-m", "actune.cli", "make-synthetic", "--out", dataDir,
      "--classes", "3", "--per-class", "50", "--dim", "6",
      "--separation", "6.0", "--seed", "12",
    ],
    { encoding: "utf-8" },
  );
  if (made.status !== 0) {
    throw new Error(`make-synthetic failed: ${made.stderr}`);
  }
  const configPath = join(dataDir, "config.json");
  const config = JSON.parse(readFileSync(configPath, "utf-8"));
  Object.assign(config, {
    T: 2, B: 10, b: 20, init_labeled: 12, K: 4, M: 2, k_st: 5,
    training: { lr: 0.1, epochs: 80, l2: 1e-4 },
    service: { bind: "127.0.0.1:0", class_names: ["world", "sports", "business"] },
  });
  writeFileSync(configPath, JSON.stringify(config));

  const snapDir = join(workDir, "snap");
  proc = spawn(
    PYTHON,
    [
      "-m", "actune.cli", "serve", "--config", configPath,
      "--snapshot-dir", snapDir, "--bind", "127.0.0.1:0",
    ],
    { stdio: "ignore" },
  );
  baseUrl = await waitForService(join(snapDir, "service.json"));
});

afterAll(() => {
  proc?.kill("SIGKILL");
  rmSync(workDir, { recursive: true, force: true });
});

describe("console against a live service", () => {
  it("renders the full batch, gates advance on completion, and surfaces conflicts", async () => {
    const annotator = new ServiceClient(baseUrl, { fetchFn: nodeFetch, annotatorId: "ui" });
    const rival = new ServiceClient(baseUrl, { fetchFn: nodeFetch, annotatorId: "rival" });

    document.body.innerHTML = "";
    const queueRoot = document.createElement("div");
    const dashRoot = document.createElement("div");
    document.body.append(queueRoot, dashRoot);
    const dashboard = new RoundDashboard(annotator, dashRoot);
    const queue = new AnnotationQueue(annotator, queueRoot, {
      onChange: () => void dashboard.refresh(),
    });

    // B=10 pending tasks render as ten cards
    await queue.refresh();
    await dashboard.refresh();
    expect(queueRoot.querySelectorAll(".task-card")).toHaveLength(10);
    const advance = () => dashRoot.querySelector(".advance-button") as HTMLButtonElement;
    expect(advance().disabled).toBe(true);

    // class options mirror GET /classes exactly
    const served = await annotator.getClasses();
    const firstCard = queueRoot.querySelector(".task-card") as HTMLElement;
    const rendered = [...firstCard.querySelectorAll(".class-button")].map(
      (b) => (b as HTMLButtonElement).dataset.classId,
    );
    expect(rendered).toEqual(served.map((c) => String(c.id)));

    // a rival annotator wins one sample; the console's submit then surfaces
    // the committed label on the card
    const victim = Number(firstCard.dataset.sampleIndex);
    await rival.submitLabel(victim, 2);
    (firstCard.querySelector(".class-button") as HTMLButtonElement).click(); // class 0
    await flush();
    const conflict = queueRoot.querySelector(".conflict-notice");
    expect(conflict?.textContent).toContain("business"); // class 2's display name
    (queueRoot.querySelector(".conflict-notice button") as HTMLButtonElement).click();

    // label every remaining card through the UI
    for (let guard = 0; guard < 20; guard += 1) {
      const card = queueRoot.querySelector(".task-card") as HTMLElement | null;
      if (!card) break;
      (card.querySelector(".class-button") as HTMLButtonElement).click();
      await flush();
    }
    expect(queue.pendingCount()).toBe(0);

    // all ten labels committed: the advance control unlocks
    await dashboard.refresh();
    expect((await annotator.getRound()).pending).toBe(0);
    expect(advance().disabled).toBe(false);

    // advancing trains the next round and the batch refills
    advance().click();
    for (let guard = 0; guard < 100; guard += 1) {
      await flush();
      if (!dashRoot.textContent?.includes("trained")) continue;
      break;
    }
    await queue.refresh();
    await dashboard.refresh();
    expect((await annotator.getRound()).t).toBe(1);
    expect(queueRoot.querySelectorAll(".task-card")).toHaveLength(10);
    expect(advance().disabled).toBe(true);

    // metrics history feeds the accuracy chart
    expect(dashRoot.querySelectorAll(".accuracy-chart circle").length).toBeGreaterThan(1);
  });
});
