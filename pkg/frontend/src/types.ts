// Payload shapes of the HTTP/JSON + server-sent-events contract.

export interface MapSnapshot {
  width: number;
  height: number;
  resolution: number;
  origin: [number, number, number];
  occupied_threshold: number;
  unknown_value: number;
  /** Run-length encoded raster, row-major from the bottom row up. */
  cells_rle: [number, number][];
}

export interface SceneObject {
  index: number;
  label: string;
  position: [number, number, number];
  observation_count: number;
}

export interface SceneSnapshot {
  dimension: number;
  objects: SceneObject[];
}

export interface TourNode {
  id: number;
  x: number;
  y: number;
  polygon_id: number | string;
  ring_index: number;
}

export interface TourDoc {
  order: number[];
  total_cost: number;
  /** One driven polyline of [x, y] points per tour leg. */
  segment_paths: [number, number][][];
  nodes: TourNode[];
}

export interface StateSnapshot {
  pose: [number, number, number];
  holding: number | null;
}

export interface PlanAction {
  verb: string;
  argument: string | null;
}

export interface SessionEvent {
  seq: number;
  type: string;
  data: Record<string, unknown>;
}

export interface Snapshots {
  map: MapSnapshot | null;
  scene: SceneSnapshot;
  tour: TourDoc | null;
  state: StateSnapshot;
}
