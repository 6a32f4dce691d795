/** Locate and drive the core loss evaluator over the DSLB exchange.
 *
 * The core binary is found through the DRIVESAFER_CORE environment variable
 * (or an explicit path), falling back to a PATH scan for `drivesafer-core`.
 * Evaluation is synchronous: one in-flight request per session, serialized
 * by construction; run sessions in separate processes for parallelism.
 */

import { execFileSync } from "node:child_process";
import { accessSync, constants, statSync } from "node:fs";
import { delimiter, join } from "node:path";

import {
  BatchArrays,
  EvalResult,
  decodeResponse,
  encodeRequest,
} from "./codec.js";
import { EnvironmentError, ProtocolError } from "./errors.js";

export const CORE_ENV_VAR = "DRIVESAFER_CORE";
export const CORE_BINARY = "drivesafer-core";

export type DacMode = "indicator" | "surrogate";

export interface LossConfig {
  lambdaDac?: number;
  lambdaCol?: number;
  lambdaComf?: number;
  dCol?: number;
  jTh?: number;
  dacMode?: DacMode;
}

const CONFIG_DEFAULTS: Required<LossConfig> = {
  lambdaDac: 1.0,
  lambdaCol: 1.0,
  lambdaComf: 1.0,
  dCol: 2.0,
  jTh: 10.0,
  dacMode: "surrogate",
};

export interface SessionStats {
  requests: number;
  bytesSent: number;
  bytesReceived: number;
}

function isExecutable(path: string): boolean {
  try {
    if (!statSync(path).isFile()) {
      return false;
    }
    accessSync(path, constants.X_OK);
    return true;
  } catch {
    return false;
  }
}

/** Resolve the core executable, throwing with every path that was tried. */
export function locateCore(explicit?: string): string {
  const searched: string[] = [];
  for (const candidate of [explicit, process.env[CORE_ENV_VAR]]) {
    if (candidate) {
      searched.push(candidate);
      if (isExecutable(candidate)) {
        return candidate;
      }
    }
  }
  for (const dir of (process.env.PATH ?? "").split(delimiter)) {
    if (!dir) {
      continue;
    }
    const candidate = join(dir, CORE_BINARY);
    searched.push(candidate);
    if (isExecutable(candidate)) {
      return candidate;
    }
  }
  throw new EnvironmentError(
    `core evaluator not found; set ${CORE_ENV_VAR} or put ${CORE_BINARY} on PATH`,
    searched,
  );
}

function configFlags(config: Required<LossConfig>): string[] {
  return [
    "--lambda-dac", String(config.lambdaDac),
    "--lambda-col", String(config.lambdaCol),
    "--lambda-comf", String(config.lambdaComf),
    "--d-col", String(config.dCol),
    "--j-th", String(config.jTh),
    "--dac-mode", config.dacMode,
  ];
}

function runCore(corePath: string, flags: string[], request: Uint8Array): Uint8Array {
  let stdout: Buffer;
  try {
    stdout = execFileSync(corePath, flags, {
      input: Buffer.from(request.buffer, request.byteOffset, request.byteLength),
      maxBuffer: 1 << 28,
    });
  } catch (err) {
    const e = err as NodeJS.ErrnoException & { status?: number | null; stderr?: Buffer };
    if (e.code === "ENOENT") {
      throw new EnvironmentError("core evaluator disappeared", [corePath]);
    }
    const stderr = e.stderr ? e.stderr.toString().trim() : "";
    throw new ProtocolError(
      `core exited with status ${e.status ?? "unknown"}${stderr ? `: ${stderr}` : ""}`,
    );
  }
  return new Uint8Array(stdout.buffer, stdout.byteOffset, stdout.byteLength);
}

/** A handle to the core evaluator with a fixed loss configuration. */
export class BridgeSession {
  readonly corePath: string;
  readonly config: Readonly<Required<LossConfig>>;
  readonly stats: SessionStats = { requests: 0, bytesSent: 0, bytesReceived: 0 };
  private readonly flags: string[];

  constructor(options: { config?: LossConfig; corePath?: string } = {}) {
    this.config = Object.freeze({ ...CONFIG_DEFAULTS, ...options.config });
    this.corePath = locateCore(options.corePath);
    this.flags = configFlags(this.config);
  }

  /** Evaluate one batch. Shape and finiteness problems throw before the
   * core is invoked; the returned values and gradient are exactly the f64
   * bits the core produced. */
  eval(batch: BatchArrays): EvalResult {
    const request = encodeRequest(batch);
    const response = runCore(this.corePath, this.flags, request);
    this.stats.requests += 1;
    this.stats.bytesSent += request.byteLength;
    this.stats.bytesReceived += response.byteLength;
    return decodeResponse(response, batch.waypoints.length, batch.waypoints[0].length);
  }
}

/** One-shot evaluation. The batch is validated before the core is located,
 * so a malformed batch reports ShapeError even on a machine with no core. */
export function bridgeEval(
  batch: BatchArrays,
  config?: LossConfig,
  corePath?: string,
): EvalResult {
  const request = encodeRequest(batch);
  const resolved: Required<LossConfig> = { ...CONFIG_DEFAULTS, ...config };
  const response = runCore(locateCore(corePath), configFlags(resolved), request);
  return decodeResponse(response, batch.waypoints.length, batch.waypoints[0].length);
}
