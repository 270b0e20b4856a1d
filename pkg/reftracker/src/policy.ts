/**
 * Reply policies. Each policy is a deterministic function of the init
 * frame index and the current frame index; none of them reads pixels, so
 * image paths are accepted and ignored.
 *
 * Specs accepted by makePolicy:
 *
 *   oracle:GT.csv        echo the ground-truth box of every frame
 *   offset:DX,DY:GT.csv  ground truth displaced by a fixed vector
 *   static               repeat whatever box the last init carried
 *   scripted:PLAN.csv    frame-indexed schedule of boxes or `fail`
 *
 * Ground-truth files are canonical `x,y,w,h` rows; rows of an absent
 * target (zero-sized placeholder) fall back to the last present box. A
 * plan row is `index,x,y,w,h` or `index,fail`; frames between entries
 * repeat the nearest earlier action.
 */

import { readFileSync } from "node:fs";

import type { Box } from "./protocol.js";

export class UsageError extends Error {}

/** Reply of a tracker that has deliberately lost the target. */
export const FAIL_BOX: Box = [1e6, 1e6, 1, 1];

export interface Policy {
  readonly kind: string;
  /** Called on every init message; index is the init frame's index. */
  onInit(index: number, box: Box): Box;
  /** One reply per frame message. */
  reply(index: number): Box;
}

function parseNumbers(row: string, source: string, lineno: number): number[] {
  const values = row.split(",").map((v) => Number(v.trim()));
  if (values.some((v) => !Number.isFinite(v))) {
    throw new UsageError(`${source}:${lineno}: unparsable row ${JSON.stringify(row)}`);
  }
  return values;
}

export function loadGroundtruth(path: string): Array<Box | null> {
  let text: string;
  try {
    text = readFileSync(path, "utf-8");
  } catch (err) {
    throw new UsageError(`cannot read ground truth ${path}: ${(err as Error).message}`);
  }
  const rows = text.split("\n").filter((r) => r.trim().length > 0);
  return rows.map((row, i) => {
    const values = parseNumbers(row, path, i + 1);
    if (values.length !== 4) {
      throw new UsageError(`${path}:${i + 1}: expected 4 values, got ${values.length}`);
    }
    const [x, y, w, h] = values;
    return w > 0 && h > 0 ? ([x, y, w, h] as Box) : null;
  });
}

class GroundtruthPolicy implements Policy {
  readonly kind: string;
  private lastBox: Box;

  constructor(
    kind: string,
    private readonly gt: Array<Box | null>,
    private readonly dx = 0,
    private readonly dy = 0,
  ) {
    this.kind = kind;
    this.lastBox = [0, 0, 1, 1];
  }

  onInit(index: number, box: Box): Box {
    this.lastBox = box;
    return box;
  }

  reply(index: number): Box {
    const row = index < this.gt.length ? this.gt[index] : null;
    if (row !== null && row !== undefined) {
      this.lastBox = [row[0] + this.dx, row[1] + this.dy, row[2], row[3]];
    }
    return this.lastBox;
  }
}

class StaticPolicy implements Policy {
  readonly kind = "static";
  private box: Box = [0, 0, 1, 1];

  onInit(index: number, box: Box): Box {
    this.box = box;
    return box;
  }

  reply(_index: number): Box {
    return this.box;
  }
}

type Action = { fail: true } | { fail: false; box: Box };

class ScriptedPolicy implements Policy {
  readonly kind = "scripted";

  constructor(private readonly plan: Array<[number, Action]>) {
    if (plan.length === 0) throw new UsageError("scripted plan is empty");
  }

  onInit(index: number, box: Box): Box {
    return box;
  }

  reply(index: number): Box {
    // nearest plan entry at or before the frame; earlier frames clamp to
    // the first entry so every index has a defined action
    let action = this.plan[0][1];
    for (const [at, entry] of this.plan) {
      if (at > index) break;
      action = entry;
    }
    return action.fail ? FAIL_BOX : action.box;
  }
}

export function loadPlan(path: string): Array<[number, Action]> {
  let text: string;
  try {
    text = readFileSync(path, "utf-8");
  } catch (err) {
    throw new UsageError(`cannot read plan ${path}: ${(err as Error).message}`);
  }
  const plan: Array<[number, Action]> = [];
  const rows = text.split("\n").filter((r) => r.trim().length > 0);
  rows.forEach((row, i) => {
    const cells = row.split(",").map((c) => c.trim());
    const index = Number(cells[0]);
    if (!Number.isInteger(index) || index < 0) {
      throw new UsageError(`${path}:${i + 1}: bad frame index ${JSON.stringify(cells[0])}`);
    }
    if (cells.length === 2 && cells[1] === "fail") {
      plan.push([index, { fail: true }]);
      return;
    }
    if (cells.length === 5) {
      const values = parseNumbers(cells.slice(1).join(","), path, i + 1);
      plan.push([index, { fail: false, box: values as Box }]);
      return;
    }
    throw new UsageError(`${path}:${i + 1}: expected \`index,fail\` or \`index,x,y,w,h\``);
  });
  plan.sort((a, b) => a[0] - b[0]);
  return plan;
}

export function makePolicy(spec: string): Policy {
  const parts = spec.split(":");
  const kind = parts[0];
  if (kind === "static") {
    if (parts.length !== 1) throw new UsageError("static policy takes no arguments");
    return new StaticPolicy();
  }
  if (kind === "oracle") {
    if (parts.length !== 2) throw new UsageError("expected oracle:GROUNDTRUTH.csv");
    return new GroundtruthPolicy("oracle", loadGroundtruth(parts[1]));
  }
  if (kind === "offset") {
    if (parts.length !== 3) throw new UsageError("expected offset:DX,DY:GROUNDTRUTH.csv");
    const deltas = parts[1].split(",").map((v) => Number(v.trim()));
    if (deltas.length !== 2 || deltas.some((v) => !Number.isFinite(v))) {
      throw new UsageError(`offset deltas must be two finite numbers, got ${parts[1]}`);
    }
    return new GroundtruthPolicy("offset", loadGroundtruth(parts[2]), deltas[0], deltas[1]);
  }
  if (kind === "scripted") {
    if (parts.length !== 2) throw new UsageError("expected scripted:PLAN.csv");
    return new ScriptedPolicy(loadPlan(parts[1]));
  }
  throw new UsageError(
    `unknown policy ${JSON.stringify(kind)}; expected oracle | offset | static | scripted`,
  );
}
