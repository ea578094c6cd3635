// Console wiring: fetch the snapshots, fold the event stream into the view
// model, and re-render. All simulation state lives on the server; the only
// mutating calls are the query, instruction, and scan endpoints.

import { connectEvents, fetchSnapshots, getJson, postJson } from "./api";
import { Camera, drawScene, fitCamera, panBy, zoomAt } from "./render";
import { initViewModel, reduce, withScene, withState, ViewModel } from "./viewmodel";
import type { PlanAction, SceneSnapshot, StateSnapshot } from "./types";

const canvas = document.getElementById("map") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const banner = document.getElementById("banner")!;
const summary = document.getElementById("summary")!;
const feed = document.getElementById("feed")!;
const planBody = document.querySelector("#plan tbody")!;
const queryForm = document.getElementById("query-form") as HTMLFormElement;
const queryText = document.getElementById("query-text") as HTMLInputElement;
const queryResult = document.getElementById("query-result")!;
const instructionForm = document.getElementById("instruction-form") as HTMLFormElement;
const instructionText = document.getElementById("instruction-text") as HTMLInputElement;
const instructionError = document.getElementById("instruction-error")!;
const submitButton = document.getElementById("instruction-submit") as HTMLButtonElement;
const plannerSelect = document.getElementById("planner") as HTMLSelectElement;
const scanButton = document.getElementById("scan") as HTMLButtonElement;

let vm: ViewModel;
let cam: Camera = { scale: 80, offsetX: 40, offsetY: 640 };

function rowClass(outcome: string): string {
  if (outcome === "pending") return "pending";
  return outcome === "ok" ? "ok" : "failed";
}

function render() {
  drawScene(ctx, vm, cam);

  const busy = vm.scanning || vm.instruction?.status === "running";
  submitButton.disabled = busy;
  scanButton.disabled = busy;
  summary.textContent =
    `${vm.objectCount} objects · pose (${vm.pose[0].toFixed(2)}, ${vm.pose[1].toFixed(2)})` +
    (vm.scanning ? " · scanning…" : "");

  queryResult.textContent = vm.highlight
    ? `${vm.highlight.label} — score ${vm.highlight.score.toFixed(3)}`
    : "";

  planBody.replaceChildren(
    ...(vm.instruction?.rows ?? []).map((row, i) => {
      const tr = document.createElement("tr");
      tr.className = rowClass(row.outcome);
      const arg = row.argument === null ? "" : `"${row.argument}"`;
      const outcome = row.outcome === "pending" ? "…" : row.outcome;
      tr.innerHTML = `<td>${i + 1}</td><td>${row.verb}(${arg})</td><td>${outcome}</td>` +
        `<td>${row.detail ?? ""}</td>`;
      return tr;
    }),
  );
  instructionError.textContent = vm.error ?? "";

  feed.replaceChildren(
    ...vm.feed
      .slice(-60)
      .reverse()
      .map((line) => {
        const li = document.createElement("li");
        li.textContent = `#${line.seq} ${line.text}`;
        return li;
      }),
  );
}

async function refreshSnapshots() {
  const [scene, state] = await Promise.all([
    getJson<SceneSnapshot>("/api/scene"),
    getJson<StateSnapshot>("/api/state"),
  ]);
  vm = withState(withScene(vm, scene), state);
  render();
}

function attachCanvasControls() {
  let dragging = false;
  let last: [number, number] = [0, 0];
  canvas.addEventListener("mousedown", (e) => {
    dragging = true;
    last = [e.offsetX, e.offsetY];
  });
  window.addEventListener("mouseup", () => (dragging = false));
  canvas.addEventListener("mousemove", (e) => {
    if (!dragging) return;
    cam = panBy(cam, e.offsetX - last[0], e.offsetY - last[1]);
    last = [e.offsetX, e.offsetY];
    render();
  });
  canvas.addEventListener("wheel", (e) => {
    e.preventDefault();
    cam = zoomAt(cam, e.offsetX, e.offsetY, e.deltaY < 0 ? 1.15 : 1 / 1.15);
    render();
  });
}

queryForm.addEventListener("submit", async (e) => {
  e.preventDefault();
  const text = queryText.value.trim();
  if (!text) return;
  const res = await postJson<{ error?: string; message?: string }>("/api/query", { text });
  if (!res.ok) {
    queryResult.textContent = `${res.body.error}: ${res.body.message}`;
  }
  // the match itself arrives on the event stream and sets the highlight
});

instructionForm.addEventListener("submit", async (e) => {
  e.preventDefault();
  const text = instructionText.value.trim();
  if (!text) return;
  const res = await postJson<{ plan?: PlanAction[]; error?: string; message?: string }>(
    "/api/instruction",
    { text, planner: plannerSelect.value },
  );
  if (!res.ok) {
    instructionError.textContent = `${res.body.error}: ${res.body.message}`;
    render();
  }
});

scanButton.addEventListener("click", async () => {
  const res = await postJson<{ error?: string; message?: string }>("/api/scan", {});
  if (!res.ok) instructionError.textContent = `${res.body.error}: ${res.body.message}`;
});

async function boot() {
  const snapshots = await fetchSnapshots();
  vm = initViewModel(snapshots);
  if (snapshots.map) cam = fitCamera(snapshots.map, canvas.width, canvas.height);
  attachCanvasControls();
  render();

  connectEvents(
    vm.lastSeq,
    (event) => {
      vm = reduce(vm, event);
      render();
      if (["scene_updated", "scan_finished", "status", "step"].includes(event.type)) {
        void refreshSnapshots();
      }
    },
    (state) => banner.classList.toggle("hidden", state === "open"),
  );
}

void boot();
