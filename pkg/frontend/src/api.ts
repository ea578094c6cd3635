// Thin client for the HTTP/JSON endpoints and the server-sent event stream.

import type {
  MapSnapshot,
  SceneSnapshot,
  SessionEvent,
  Snapshots,
  StateSnapshot,
  TourDoc,
} from "./types";

export async function getJson<T>(path: string): Promise<T> {
  const res = await fetch(path);
  if (!res.ok) throw new Error(`GET ${path} -> ${res.status}`);
  return (await res.json()) as T;
}

export interface PostResult<T> {
  ok: boolean;
  status: number;
  body: T;
}

export async function postJson<T>(path: string, body: unknown): Promise<PostResult<T>> {
  const res = await fetch(path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  return { ok: res.ok, status: res.status, body: (await res.json()) as T };
}

export async function fetchSnapshots(): Promise<Snapshots> {
  const [map, scene, tourDoc, state] = await Promise.all([
    getJson<MapSnapshot>("/api/map"),
    getJson<SceneSnapshot>("/api/scene"),
    getJson<{ tour: TourDoc | null }>("/api/tour"),
    getJson<StateSnapshot>("/api/state"),
  ]);
  return { map, scene, tour: tourDoc.tour, state };
}

export const EVENT_TYPES = [
  "scan_started",
  "tour",
  "pose",
  "scene_updated",
  "scan_finished",
  "query",
  "plan",
  "step",
  "status",
  "error",
] as const;

export interface StreamHandle {
  close(): void;
}

/**
 * Subscribe to /api/events. The browser's EventSource reconnects on its own
 * and resends the Last-Event-ID header, so a dropped stream resumes where it
 * left off; `onState` drives the reconnect banner.
 */
export function connectEvents(
  lastSeq: number,
  onEvent: (event: SessionEvent) => void,
  onState: (state: "open" | "reconnecting") => void,
): StreamHandle {
  const source = new EventSource(`/api/events?last_event_id=${lastSeq}`);
  source.onopen = () => onState("open");
  const deliver = (e: MessageEvent, type: string) => {
    onEvent({ seq: Number(e.lastEventId), type, data: JSON.parse(e.data) });
  };
  for (const type of EVENT_TYPES) {
    if (type === "error") continue; // handled below to avoid the name clash
    source.addEventListener(type, (e) => deliver(e as MessageEvent, type));
  }
  source.addEventListener("error", (e) => {
    const msg = e as MessageEvent;
    if (typeof msg.data === "string" && msg.data.length > 0) {
      deliver(msg, "error"); // a server-emitted error event
    } else {
      onState("reconnecting"); // the connection itself dropped
    }
  });
  return { close: () => source.close() };
}
