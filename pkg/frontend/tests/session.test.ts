// End-to-end scripted session against a real service process: scan the demo
// world, query for an object, run a pick-and-place instruction, and check that
// replaying the captured event log reproduces the final view model.

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { type ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { decodeRle } from "../src/render";
import type { SessionEvent, Snapshots } from "../src/types";
import { buildViewModel, type ViewModel } from "../src/viewmodel";

const PORT = 18000 + Math.floor(Math.random() * 10000);
const BASE = `http://127.0.0.1:${PORT}`;

let workdir: string;
let server: ChildProcess;

async function getJson<T>(path: string): Promise<T> {
  const res = await fetch(BASE + path);
  if (!res.ok) throw new Error(`GET ${path} -> ${res.status}`);
  return (await res.json()) as T;
}

async function postJson(path: string, body: unknown) {
  const res = await fetch(BASE + path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  return { ok: res.ok, status: res.status, body: await res.json() };
}

/** Fetch the whole event backlog via the non-following stream mode. */
async function eventLog(): Promise<SessionEvent[]> {
  const res = await fetch(`${BASE}/api/events?follow=false`);
  const text = await res.text();
  const events: SessionEvent[] = [];
  for (const block of text.split("\n\n")) {
    const fields: Record<string, string> = {};
    for (const line of block.split("\n")) {
      const at = line.indexOf(": ");
      if (at > 0) fields[line.slice(0, at)] = line.slice(at + 2);
    }
    if (fields.id && fields.event && fields.data) {
      events.push({
        seq: Number(fields.id),
        type: fields.event,
        data: JSON.parse(fields.data),
      });
    }
  }
  return events;
}

async function waitFor(type: string, timeoutMs = 120_000): Promise<SessionEvent[]> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const events = await eventLog();
    if (events.some((e) => e.type === type)) return events;
    if (Date.now() > deadline) throw new Error(`no "${type}" event within ${timeoutMs}ms`);
    await new Promise((r) => setTimeout(r, 250));
  }
}

async function fetchSnapshots(): Promise<Snapshots> {
  const [map, scene, tourDoc, state] = await Promise.all([
    getJson<Snapshots["map"]>("/api/map"),
    getJson<Snapshots["scene"]>("/api/scene"),
    getJson<{ tour: Snapshots["tour"] }>("/api/tour"),
    getJson<Snapshots["state"]>("/api/state"),
  ]);
  return { map, scene, tour: tourDoc.tour, state };
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "console-e2e-"));
  execFileSync("python3", ["-m", "vsrnav", "make-demo", "--kind", "query", "--out", workdir]);
  server = spawn(
    "python3",
    ["-m", "vsrnav", "serve", "--world", join(workdir, "world.json"),
      "--port", String(PORT), "--vocab", "experiment"],
    { stdio: "ignore" },
  );
  const deadline = Date.now() + 60_000;
  for (;;) {
    try {
      await getJson("/api/map");
      break;
    } catch {
      if (Date.now() > deadline) throw new Error("service did not come up");
      await new Promise((r) => setTimeout(r, 250));
    }
  }
}, 120_000);

afterAll(() => {
  server?.kill();
  rmSync(workdir, { recursive: true, force: true });
});

// The scripted flow below is one session: each step builds on the previous
// one, so the tests run in file order and share the captured event log.
describe("scripted operator session", () => {
  let snapshots: Snapshots;
  let finalLog: SessionEvent[];
  let finalVm: ViewModel;

  it("serves a well-formed map snapshot", async () => {
    snapshots = await fetchSnapshots();
    const map = snapshots.map!;
    expect(map.width).toBeGreaterThan(0);
    expect(map.resolution).toBeGreaterThan(0);
    const cells = decodeRle(map); // throws unless runs cover width*height exactly
    expect(cells.length).toBe(map.width * map.height);
    expect(snapshots.state.pose).toHaveLength(3);
  });

  it("scans the world and ends up with at least 20 scene markers", async () => {
    const res = await postJson("/api/scan", {});
    expect(res.ok).toBe(true);
    const log = await waitFor("scan_finished");
    expect(log.some((e) => e.type === "scan_started")).toBe(true);
    expect(log.some((e) => e.type === "tour")).toBe(true);

    snapshots = await fetchSnapshots();
    expect(snapshots.scene.objects.length).toBeGreaterThanOrEqual(20);
    const labels = snapshots.scene.objects.map((o) => o.label);
    expect(labels).toContain("apple");
    expect(labels).toContain("wooden desk");
  });

  it("highlights the queried object through the event stream", async () => {
    const res = await postJson("/api/query", { text: "apple" });
    expect(res.ok).toBe(true);
    const log = await waitFor("query");
    const vm = buildViewModel(snapshots, log);
    expect(vm.highlight).not.toBeNull();
    expect(vm.highlight!.label).toBe("apple");
    expect(vm.highlight!.score).toBeGreaterThan(0.5);
  });

  it("runs a pick-and-place instruction to completion", async () => {
    const res = await postJson("/api/instruction", {
      text: "Put the apple on the wooden desk.",
      planner: "rule",
    });
    expect(res.ok).toBe(true);
    finalLog = await waitFor("status");

    const plan = finalLog.filter((e) => e.type === "plan").at(-1)!;
    expect((plan.data.actions as unknown[]).length).toBe(5);

    const steps = finalLog.filter((e) => e.type === "step" && e.seq > plan.seq);
    expect(steps.map((e) => e.data.index)).toEqual([0, 1, 2, 3, 4]);
    for (let i = 1; i < steps.length; i++) {
      expect(steps[i].seq).toBeGreaterThan(steps[i - 1].seq);
    }
    expect(steps.every((e) => e.data.outcome === "ok")).toBe(true);

    finalVm = buildViewModel(snapshots, finalLog);
    expect(finalVm.instruction!.status).toBe("success");
    expect(finalVm.instruction!.rows).toHaveLength(5);
    expect(finalVm.instruction!.rows.every((r) => r.outcome === "ok")).toBe(true);
  });

  it("replaying the captured log reproduces the final view model", () => {
    const replayed = buildViewModel(snapshots, finalLog);
    expect(replayed).toEqual(finalVm);
    expect(JSON.stringify(replayed)).toBe(JSON.stringify(finalVm));
  });
});
