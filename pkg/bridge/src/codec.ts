/** DSLB batch-exchange codec. Everything is little-endian.
 *
 * Request:
 *   magic   4 bytes  "DSLB"
 *   version u32      (currently 1)
 *   B       u32      scenes in the batch
 *   T       u32      waypoints per scene
 *   dt      f64
 *   then per scene:
 *     waypoints        T*2 f64            (x, y per step)
 *     agent_count      u32                (N)
 *     agent_positions  T*N*2 f64          (step-major, then agent)
 *     n_outers         u32
 *     n_holes          u32
 *     per ring, outers first: count u32, then count*2 f64 vertices
 *
 * Response:
 *   l_dac, l_col, l_comf   3 f64    (unweighted values)
 *   grad                   B*T*2 f64 (lambda-weighted total gradient)
 *
 * The loss configuration travels out-of-band as core CLI flags, so request
 * bytes depend only on the batch itself. This module marshals; it computes
 * no loss math.
 */

import { ProtocolError, ShapeError, ValidationError } from "./errors.js";

export const MAGIC = "DSLB";
export const VERSION = 1;
/** The core's comfort term differentiates a third-difference stencil. */
export const MIN_HORIZON = 4;

export type Ring = number[][];

export interface PolygonArea {
  /** Counter-clockwise outer rings, at least one, each >= 3 vertices. */
  outers: Ring[];
  /** Clockwise hole rings. */
  holes: Ring[];
}

export interface BatchArrays {
  /** B x T x 2 trainer-resident waypoints. */
  waypoints: number[][][];
  /** Seconds between consecutive waypoints. */
  dt: number;
  /** Per scene: T x N_b x 2 forecast agent positions (N_b may be 0). */
  agents: number[][][][];
  /** Per scene drivable area. */
  areas: PolygonArea[];
}

export interface LossValues {
  lDac: number;
  lCol: number;
  lComf: number;
}

export interface EvalResult {
  /** Unweighted per-term loss values. */
  values: LossValues;
  /** Lambda-weighted total gradient, flattened B x T x 2, step-major. */
  gradient: Float64Array;
  batchSize: number;
  horizon: number;
}

function isPair(p: unknown): p is number[] {
  return Array.isArray(p) && p.length === 2 &&
    typeof p[0] === "number" && typeof p[1] === "number";
}

function checkFinitePair(p: number[], label: string): void {
  if (!Number.isFinite(p[0]) || !Number.isFinite(p[1])) {
    throw new ValidationError(`${label} must be finite, got [${p[0]}, ${p[1]}]`);
  }
}

/** Structural and numeric validation; throws before any byte is written. */
export function validateBatch(batch: BatchArrays): { b: number; t: number } {
  const { waypoints, dt, agents, areas } = batch;
  if (!Array.isArray(waypoints) || waypoints.length === 0) {
    throw new ShapeError("waypoints must be a nonempty B x T x 2 array");
  }
  const b = waypoints.length;
  const t = Array.isArray(waypoints[0]) ? waypoints[0].length : 0;
  if (t < MIN_HORIZON) {
    throw new ShapeError(`horizon T must be >= ${MIN_HORIZON}, got ${t}`);
  }
  for (let i = 0; i < b; i++) {
    const scene = waypoints[i];
    if (!Array.isArray(scene) || scene.length !== t) {
      throw new ShapeError(`waypoints[${i}] must have ${t} steps`);
    }
    for (let k = 0; k < t; k++) {
      if (!isPair(scene[k])) {
        throw new ShapeError(`waypoints[${i}][${k}] must be an [x, y] pair`);
      }
      checkFinitePair(scene[k], `waypoints[${i}][${k}]`);
    }
  }
  if (typeof dt !== "number" || !Number.isFinite(dt)) {
    throw new ValidationError(`dt must be finite, got ${dt}`);
  }
  if (dt <= 0) {
    throw new ValidationError(`dt must be positive, got ${dt}`);
  }
  if (!Array.isArray(agents) || agents.length !== b) {
    throw new ShapeError(`agents must have one T x N x 2 array per scene (${b})`);
  }
  for (let i = 0; i < b; i++) {
    const scene = agents[i];
    if (!Array.isArray(scene) || scene.length !== t) {
      throw new ShapeError(`agents[${i}] must have ${t} steps`);
    }
    const n = Array.isArray(scene[0]) ? scene[0].length : -1;
    for (let k = 0; k < t; k++) {
      const step = scene[k];
      if (!Array.isArray(step) || step.length !== n) {
        throw new ShapeError(`agents[${i}][${k}] must list ${n} agents`);
      }
      for (let a = 0; a < n; a++) {
        if (!isPair(step[a])) {
          throw new ShapeError(`agents[${i}][${k}][${a}] must be an [x, y] pair`);
        }
        checkFinitePair(step[a], `agents[${i}][${k}][${a}]`);
      }
    }
  }
  if (!Array.isArray(areas) || areas.length !== b) {
    throw new ShapeError(`areas must have one polygon set per scene (${b})`);
  }
  for (let i = 0; i < b; i++) {
    const area = areas[i];
    if (!area || !Array.isArray(area.outers) || !Array.isArray(area.holes)) {
      throw new ShapeError(`areas[${i}] must have outers and holes ring lists`);
    }
    if (area.outers.length === 0) {
      throw new ShapeError(`areas[${i}] needs at least one outer ring`);
    }
    for (const [kind, rings] of [["outers", area.outers], ["holes", area.holes]] as const) {
      rings.forEach((ring, r) => {
        if (!Array.isArray(ring) || ring.length < 3) {
          throw new ShapeError(`areas[${i}].${kind}[${r}] needs >= 3 vertices`);
        }
        ring.forEach((v, vi) => {
          if (!isPair(v)) {
            throw new ShapeError(`areas[${i}].${kind}[${r}][${vi}] must be an [x, y] pair`);
          }
          checkFinitePair(v, `areas[${i}].${kind}[${r}][${vi}]`);
        });
      });
    }
  }
  return { b, t };
}

function requestByteLength(batch: BatchArrays, b: number, t: number): number {
  let size = 4 + 4 + 4 + 4 + 8; // magic, version, B, T, dt
  for (let i = 0; i < b; i++) {
    size += t * 16; // waypoints
    const n = batch.agents[i][0].length;
    size += 4 + t * n * 16;
    size += 8; // n_outers, n_holes
    for (const ring of [...batch.areas[i].outers, ...batch.areas[i].holes]) {
      size += 4 + ring.length * 16;
    }
  }
  return size;
}

class Writer {
  readonly view: DataView;
  offset = 0;

  constructor(byteLength: number) {
    this.view = new DataView(new ArrayBuffer(byteLength));
  }

  u32(value: number): void {
    this.view.setUint32(this.offset, value, true);
    this.offset += 4;
  }

  f64(value: number): void {
    this.view.setFloat64(this.offset, value, true);
    this.offset += 8;
  }

  pairs(points: number[][]): void {
    for (const [x, y] of points) {
      this.f64(x);
      this.f64(y);
    }
  }
}

/** Serialize a validated batch into DSLB request bytes. */
export function encodeRequest(batch: BatchArrays): Uint8Array {
  const { b, t } = validateBatch(batch);
  const w = new Writer(requestByteLength(batch, b, t));
  for (const ch of MAGIC) {
    w.view.setUint8(w.offset++, ch.charCodeAt(0));
  }
  w.u32(VERSION);
  w.u32(b);
  w.u32(t);
  w.f64(batch.dt);
  for (let i = 0; i < b; i++) {
    w.pairs(batch.waypoints[i]);
    const scene = batch.agents[i];
    w.u32(scene[0].length);
    for (const step of scene) {
      w.pairs(step);
    }
    const area = batch.areas[i];
    w.u32(area.outers.length);
    w.u32(area.holes.length);
    for (const ring of [...area.outers, ...area.holes]) {
      w.u32(ring.length);
      w.pairs(ring);
    }
  }
  return new Uint8Array(w.view.buffer);
}

class Reader {
  readonly view: DataView;
  offset = 0;

  constructor(data: Uint8Array) {
    this.view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  }

  need(n: number, what: string): void {
    if (this.offset + n > this.view.byteLength) {
      throw new ProtocolError(
        `truncated ${what}: wanted ${n} bytes at offset ${this.offset}, ` +
        `have ${this.view.byteLength - this.offset}`,
      );
    }
  }

  u32(what: string): number {
    this.need(4, what);
    const v = this.view.getUint32(this.offset, true);
    this.offset += 4;
    return v;
  }

  f64(what: string): number {
    this.need(8, what);
    const v = this.view.getFloat64(this.offset, true);
    this.offset += 8;
    return v;
  }

  pairs(count: number, what: string): number[][] {
    const out: number[][] = [];
    for (let i = 0; i < count; i++) {
      out.push([this.f64(what), this.f64(what)]);
    }
    return out;
  }
}

/** Parse DSLB request bytes back into batch arrays (used for verification
 * and fault-injection checks; the bridge itself only ever encodes). */
export function decodeRequest(data: Uint8Array): BatchArrays {
  const r = new Reader(data);
  r.need(4, "request");
  const magic = String.fromCharCode(
    r.view.getUint8(0), r.view.getUint8(1), r.view.getUint8(2), r.view.getUint8(3),
  );
  r.offset = 4;
  if (magic !== MAGIC) {
    throw new ProtocolError(`bad magic ${JSON.stringify(magic)}, expected "${MAGIC}"`);
  }
  const version = r.u32("request");
  if (version !== VERSION) {
    throw new ProtocolError(`unsupported version ${version}, expected ${VERSION}`);
  }
  const b = r.u32("request");
  const t = r.u32("request");
  const dt = r.f64("request");
  const waypoints: number[][][] = [];
  const agents: number[][][][] = [];
  const areas: PolygonArea[] = [];
  for (let i = 0; i < b; i++) {
    waypoints.push(r.pairs(t, "waypoints"));
    const n = r.u32("agent count");
    const scene: number[][][] = [];
    for (let k = 0; k < t; k++) {
      scene.push(r.pairs(n, "agent positions"));
    }
    agents.push(scene);
    const nOuters = r.u32("ring counts");
    const nHoles = r.u32("ring counts");
    const rings: Ring[] = [];
    for (let q = 0; q < nOuters + nHoles; q++) {
      rings.push(r.pairs(r.u32("ring size"), "ring vertices"));
    }
    areas.push({ outers: rings.slice(0, nOuters), holes: rings.slice(nOuters) });
  }
  if (r.offset !== data.byteLength) {
    throw new ProtocolError(`${data.byteLength - r.offset} trailing bytes after request`);
  }
  return { waypoints, dt, agents, areas };
}

/** Parse DSLB response bytes for a batch of the given dimensions. */
export function decodeResponse(data: Uint8Array, batchSize: number, horizon: number): EvalResult {
  const expected = 24 + batchSize * horizon * 16;
  if (data.byteLength !== expected) {
    throw new ProtocolError(
      `response must be ${expected} bytes for B=${batchSize}, T=${horizon}, ` +
      `got ${data.byteLength}`,
    );
  }
  const r = new Reader(data);
  const values: LossValues = {
    lDac: r.f64("response"),
    lCol: r.f64("response"),
    lComf: r.f64("response"),
  };
  const gradient = new Float64Array(batchSize * horizon * 2);
  for (let i = 0; i < gradient.length; i++) {
    gradient[i] = r.f64("gradient");
  }
  return { values, gradient, batchSize, horizon };
}
