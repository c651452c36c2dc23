/**
 * End-to-end: boots the real service (deterministic backend, fixture cases)
 * and drives it through the same console-core module the browser bundle
 * uses, over real HTTP and WebSocket transports.
 *
 * Scenario: load case_a, run Task 1 by typed utterance in each mode and
 * watch the three named badges light, trigger the retry banner with a
 * nonsense query, then complete one correction flow.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { ConsoleCore } from "../src/console-core.js";
import { makeHttpClient, makeSocketFactory } from "../src/transport.js";

const PORT = 8890 + Math.floor(Math.random() * 100);
const BASE = `http://127.0.0.1:${PORT}`;
const REPO_ROOT = resolve(__dirname, "../..");

let server: ChildProcess;

async function sleep(ms: number): Promise<void> {
  return new Promise((r) => setTimeout(r, ms));
}

async function waitFor(check: () => boolean, timeoutMs: number, label: string): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (check()) return;
    await sleep(50);
  }
  throw new Error(`timed out waiting for ${label}`);
}

async function waitForServer(): Promise<void> {
  const deadline = Date.now() + 60_000;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/cases`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await sleep(200);
  }
  throw new Error("service did not come up");
}

function newCore(): ConsoleCore {
  return new ConsoleCore(
    makeHttpClient(BASE),
    makeSocketFactory(`ws://127.0.0.1:${PORT}`, WebSocket as never),
    { chimeEnabled: false },
  );
}

beforeAll(async () => {
  const varDir = mkdtempSync(join(tmpdir(), "scopevoice-e2e-"));
  const configPath = join(varDir, "config.json");
  writeFileSync(configPath, JSON.stringify({
    profile: "refined",
    cases_dir: join(REPO_ROOT, "fixtures"),
    data_dir: varDir,
    backend: { kind: "deterministic" },
  }));
  server = spawn(
    "python3", ["-m", "scopevoice.cli", "serve", "--config", configPath,
                "--host", "127.0.0.1", "--port", String(PORT)],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  server.stderr?.on("data", () => undefined); // keep the pipe drained
  server.stdout?.on("data", () => undefined);
  await waitForServer();
}, 90_000);

afterAll(() => {
  server?.kill("SIGTERM");
});

describe("operator console against the live service", () => {
  it("runs Task 1 in grammar mode: the three named badges light", async () => {
    const core = newCore();
    await core.loadCases();
    expect(core.cases.map((c) => c.case_id)).toContain("case_a");
    await core.selectCase("case_a");
    await core.createSession("grammar", "refined");

    for (const phrase of ["tumor on", "vena cava on", "portal vein on"]) {
      await core.submitUtterance(phrase);
    }
    await waitFor(
      () => core.visibleIds().size === 3,
      5_000, "grammar badges",
    );
    expect(core.visibleIds()).toEqual(new Set(["tumor", "vena_cava", "portal_vein"]));
    const badges = core.badgeGroups().flatMap((g) => g.badges).filter((b) => b.visible);
    expect(badges.map((b) => b.label).sort()).toEqual(["Portal vein", "Tumor", "Vena cava"]);
    core.disconnect();
  }, 30_000);

  it("runs Task 1 in llm mode via dictation", async () => {
    const core = newCore();
    await core.loadCases();
    await core.selectCase("case_a");
    await core.createSession("llm", "refined");

    await core.submitUtterance("assistant");
    await waitFor(() => !core.inputDisabled, 5_000, "activation feedback");
    await core.submitUtterance("Only enable the tumor, inferior vena cava, and portal vein.");
    // refined profile sends 1.5 s after speech stops; the live ticker drives it
    await waitFor(() => core.visibleIds().size === 3, 10_000, "llm badges");
    expect(core.visibleIds()).toEqual(new Set(["tumor", "vena_cava", "portal_vein"]));
    expect(core.feed.some((e) => e.kind === "QueryReady")).toBe(true);
    core.disconnect();
  }, 30_000);

  it("shows the retry banner for a nonsense query", async () => {
    const core = newCore();
    await core.loadCases();
    await core.selectCase("case_a");
    await core.createSession("llm", "refined");

    await core.submitUtterance("assistant");
    await waitFor(() => !core.inputDisabled, 5_000, "activation feedback");
    await core.submitUtterance("what is the weather like today");
    await waitFor(
      () => core.banner === "Please state your request differently",
      10_000, "retry banner",
    );
    core.disconnect();
  }, 30_000);

  it("completes a correction flow and honors it afterwards", async () => {
    const core = newCore();
    await core.loadCases();
    await core.selectCase("case_a");
    await core.createSession("llm", "refined");
    await core.fetchPromptInfo();
    const before = core.exampleCount ?? 0;

    // empty call list is blocked client-side
    core.openCorrection();
    expect(await core.confirmCorrection("whatever", [])).toBe(false);

    const ok = await core.confirmCorrection(
      "show the venous confluence",
      ["set_visibility(splenic_vein, on)", "set_visibility(portal_vein, on)"],
    );
    expect(ok).toBe(true);
    expect(core.exampleCount).toBe(before + 1);
    await waitFor(() => core.banner === "session refreshed", 5_000, "reset banner");

    await core.submitUtterance("assistant");
    await waitFor(() => !core.inputDisabled, 5_000, "activation feedback");
    await core.submitUtterance("show the venous confluence");
    await waitFor(
      () => core.visibleIds().has("splenic_vein") && core.visibleIds().has("portal_vein"),
      10_000, "corrected sentence honored",
    );
    core.disconnect();
  }, 30_000);
});
