// Pure view-model layer: everything the console renders derives from the
// initial API snapshots plus the ordered event stream. `reduce` never mutates
// its input, so replaying a captured event log over the same snapshots always
// reproduces the same view model.

import type {
  MapSnapshot,
  PlanAction,
  SceneObject,
  SceneSnapshot,
  SessionEvent,
  Snapshots,
  StateSnapshot,
  TourDoc,
} from "./types";

export interface PlanRow {
  verb: string;
  argument: string | null;
  /** "pending" until this step's event arrives, then "ok" or an error kind. */
  outcome: string;
  detail: string | null;
}

export interface InstructionState {
  text: string;
  source: string;
  rows: PlanRow[];
  status: "running" | "success" | "error";
}

export interface QueryHighlight {
  text: string;
  index: number;
  label: string;
  score: number;
}

export interface FeedLine {
  seq: number;
  text: string;
}

export interface ViewModel {
  map: MapSnapshot | null;
  tour: TourDoc | null;
  objects: SceneObject[];
  objectCount: number;
  pose: [number, number, number];
  holding: number | null;
  highlight: QueryHighlight | null;
  instruction: InstructionState | null;
  scanning: boolean;
  error: string | null;
  feed: FeedLine[];
  lastSeq: number;
}

const FEED_LIMIT = 200;

export function initViewModel(snapshots: Snapshots): ViewModel {
  return {
    map: snapshots.map,
    tour: snapshots.tour,
    objects: snapshots.scene.objects,
    objectCount: snapshots.scene.objects.length,
    pose: snapshots.state.pose,
    holding: snapshots.state.holding,
    highlight: null,
    instruction: null,
    scanning: false,
    error: null,
    feed: [],
    lastSeq: 0,
  };
}

/** Fold refreshed snapshot data in without touching event-derived state. */
export function withScene(vm: ViewModel, scene: SceneSnapshot): ViewModel {
  return { ...vm, objects: scene.objects, objectCount: scene.objects.length };
}

export function withState(vm: ViewModel, state: StateSnapshot): ViewModel {
  return { ...vm, pose: state.pose, holding: state.holding };
}

function feedLine(event: SessionEvent): string {
  const d = event.data;
  switch (event.type) {
    case "scan_started":
      return "scan started";
    case "tour":
      return `tour planned: ${(d.order as number[]).length - 1} legs, cost ${(d.total_cost as number).toFixed(2)} m`;
    case "pose": {
      const labels = d.detections as string[];
      return labels.length ? `sees ${labels.join(", ")}` : "moving";
    }
    case "scene_updated":
      return `scene has ${d.count} objects`;
    case "scan_finished":
      return `scan finished: ${d.objects} objects`;
    case "query":
      return `query "${d.text}" -> ${d.label} (${(d.score as number).toFixed(3)})`;
    case "plan":
      return `plan (${d.source}): ${(d.actions as PlanAction[]).length} steps`;
    case "step":
      return `step ${(d.index as number) + 1}: ${d.verb}(${d.argument ?? ""}) -> ${d.outcome}`;
    case "status":
      return `instruction ${d.status}`;
    case "error":
      return `error: ${d.message}`;
    default:
      return event.type;
  }
}

export function reduce(vm: ViewModel, event: SessionEvent): ViewModel {
  const next: ViewModel = {
    ...vm,
    lastSeq: Math.max(vm.lastSeq, event.seq),
    feed: [...vm.feed, { seq: event.seq, text: feedLine(event) }].slice(-FEED_LIMIT),
  };
  const d = event.data;
  switch (event.type) {
    case "scan_started":
      next.scanning = true;
      next.error = null;
      break;
    case "tour":
      next.tour = d as unknown as TourDoc;
      break;
    case "pose":
      next.pose = d.pose as [number, number, number];
      break;
    case "scene_updated":
      next.objectCount = d.count as number;
      break;
    case "scan_finished":
      next.scanning = false;
      next.objectCount = d.objects as number;
      break;
    case "query":
      next.highlight = {
        text: d.text as string,
        index: d.index as number,
        label: d.label as string,
        score: d.score as number,
      };
      break;
    case "plan":
      next.instruction = {
        text: d.instruction as string,
        source: d.source as string,
        rows: (d.actions as PlanAction[]).map((a) => ({
          verb: a.verb,
          argument: a.argument,
          outcome: "pending",
          detail: null,
        })),
        status: "running",
      };
      break;
    case "step": {
      if (!next.instruction) break;
      const index = d.index as number;
      const rows = next.instruction.rows.map((row, i) =>
        i === index
          ? { ...row, outcome: d.outcome as string, detail: (d.detail as string | null) ?? null }
          : row,
      );
      next.instruction = { ...next.instruction, rows };
      if (d.pose) next.pose = d.pose as [number, number, number];
      break;
    }
    case "status":
      if (next.instruction) {
        next.instruction = {
          ...next.instruction,
          status: d.status === "success" ? "success" : "error",
        };
      }
      break;
    case "error":
      next.error = d.message as string;
      next.scanning = false;
      break;
    default:
      break; // unknown event types are kept in the feed only
  }
  return next;
}

/** Replay entry point: the whole view model from snapshots + an event log. */
export function buildViewModel(snapshots: Snapshots, events: SessionEvent[]): ViewModel {
  return events.reduce(reduce, initViewModel(snapshots));
}
