#!/usr/bin/env node
/** End-to-end install verification: run the three exact single-term loss
 * fixtures through the real core and confirm the decoded values, then
 * fault-inject a corrupted request header and confirm the codec rejects it.
 * Exits 0 only when every check passes.
 */

import { realpathSync } from "node:fs";
import { pathToFileURL } from "node:url";

import { BatchArrays, decodeRequest, encodeRequest, MAGIC } from "./codec.js";
import { EnvironmentError, ProtocolError } from "./errors.js";
import { BridgeSession, LossConfig } from "./session.js";

export interface SelfcheckCheck {
  name: string;
  ok: boolean;
  detail: string;
}

export interface SelfcheckReport {
  status: number;
  corePath: string;
  checks: SelfcheckCheck[];
}

const BIG_SQUARE = [[-100, -100], [100, -100], [100, 100], [-100, 100]];
const UNIT_SQUARE = [[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]];

function repeated(point: number[], t: number): number[][] {
  return Array.from({ length: t }, () => [...point]);
}

function fixtureBatch(
  waypoints: number[][],
  outer: number[][],
  agentPoint?: number[],
): BatchArrays {
  const t = waypoints.length;
  return {
    waypoints: [waypoints],
    dt: 0.5,
    agents: [waypoints.map(() => (agentPoint ? [[...agentPoint]] : []))],
    areas: [{ outers: [outer.map((v) => [...v])], holes: [] }],
  };
}

interface Fixture {
  name: string;
  batch: BatchArrays;
  config: LossConfig;
  pick: "lDac" | "lCol" | "lComf";
  expected: number;
}

/** The three parity fixtures: one exact value per loss term. */
const FIXTURES: Fixture[] = [
  {
    name: "dac surrogate fixture",
    batch: fixtureBatch(repeated([2.0, 0.0], 4), UNIT_SQUARE),
    config: { dacMode: "surrogate" },
    pick: "lDac",
    expected: 1.5,
  },
  {
    name: "collision hinge fixture",
    batch: fixtureBatch(repeated([0.0, 0.0], 4), BIG_SQUARE, [1.0, 0.0]),
    config: { dCol: 2.0 },
    pick: "lCol",
    expected: 1.0,
  },
  {
    name: "comfort quadratic fixture",
    batch: fixtureBatch(
      Array.from({ length: 8 }, (_, i) => [0.5 * (i + 1) + 0.125 * (i + 1) ** 2, 0.0]),
      BIG_SQUARE,
    ),
    config: {},
    pick: "lComf",
    expected: 0.0,
  },
];

/** Run every check against a located core. Throws EnvironmentError when no
 * core can be found; any other failure lands in the report as ok=false. */
export function bridgeSelfcheck(corePath?: string): SelfcheckReport {
  const checks: SelfcheckCheck[] = [];
  let sessionPath = "";
  for (const fixture of FIXTURES) {
    let ok = false;
    let detail: string;
    try {
      const session = new BridgeSession({ config: fixture.config, corePath });
      sessionPath = session.corePath;
      const result = session.eval(fixture.batch);
      const actual = result.values[fixture.pick];
      ok = Object.is(actual, fixture.expected);
      detail = `${fixture.pick} = ${actual}, expected ${fixture.expected}`;
    } catch (err) {
      if (err instanceof EnvironmentError) {
        throw err;
      }
      detail = String(err);
    }
    checks.push({ name: fixture.name, ok, detail });
  }

  let rejected = false;
  let detail = "corrupted magic was not rejected";
  try {
    const bytes = encodeRequest(FIXTURES[0].batch);
    bytes[0] = "X".charCodeAt(0);
    decodeRequest(bytes);
  } catch (err) {
    rejected = err instanceof ProtocolError && err.message.includes(MAGIC);
    detail = String(err);
  }
  checks.push({ name: "corrupted header rejected", ok: rejected, detail });

  return {
    status: checks.every((c) => c.ok) ? 0 : 1,
    corePath: sessionPath,
    checks,
  };
}

function cliMain(): number {
  let report: SelfcheckReport;
  try {
    report = bridgeSelfcheck();
  } catch (err) {
    if (err instanceof EnvironmentError) {
      console.error(`bridge-selfcheck: ${err.message}`);
      return 2;
    }
    throw err;
  }
  console.log(`core: ${report.corePath}`);
  for (const check of report.checks) {
    console.log(`  ${check.ok ? "ok  " : "FAIL"} ${check.name} (${check.detail})`);
  }
  console.log(report.status === 0 ? "selfcheck passed" : "selfcheck FAILED");
  return report.status;
}

function invokedDirectly(): boolean {
  if (process.argv[1] === undefined) {
    return false;
  }
  try {
    return import.meta.url === pathToFileURL(realpathSync(process.argv[1])).href;
  } catch {
    return false;
  }
}

if (invokedDirectly()) {
  process.exit(cliMain());
}
