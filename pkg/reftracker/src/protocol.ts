/**
 * Wire protocol: one JSON object per line, UTF-8.
 *
 * The engine opens with {"type":"hello","version":1}; the tracker answers
 * {"type":"hello","name":...}. Every init (frame path + ground-truth box)
 * and frame (path only) must be answered with exactly one state carrying
 * the predicted box. Unknown fields are ignored for forward
 * compatibility.
 */

export type Box = [number, number, number, number];

export type MessageType = "hello" | "init" | "frame" | "state" | "quit" | "error";

export interface Message {
  type: MessageType;
  version?: number;
  name?: string;
  frame?: string;
  bbox?: Box;
  message?: string;
}

const MESSAGE_TYPES: ReadonlySet<string> = new Set([
  "hello",
  "init",
  "frame",
  "state",
  "quit",
  "error",
]);

export class ProtocolError extends Error {}

export function encode(msg: Message): string {
  const doc: Record<string, unknown> = { type: msg.type };
  if (msg.version !== undefined) doc.version = msg.version;
  if (msg.name !== undefined) doc.name = msg.name;
  if (msg.frame !== undefined) doc.frame = msg.frame;
  if (msg.bbox !== undefined) doc.bbox = msg.bbox;
  if (msg.message !== undefined) doc.message = msg.message;
  return JSON.stringify(doc);
}

export function decode(line: string): Message {
  let doc: unknown;
  try {
    doc = JSON.parse(line);
  } catch (err) {
    throw new ProtocolError(`invalid JSON line: ${(err as Error).message}`);
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new ProtocolError("message must be a JSON object");
  }
  const record = doc as Record<string, unknown>;
  const type = record.type;
  if (typeof type !== "string" || !MESSAGE_TYPES.has(type)) {
    throw new ProtocolError(`unknown message type ${JSON.stringify(type)}`);
  }
  const msg: Message = { type: type as MessageType };
  if (record.version !== undefined) {
    if (typeof record.version !== "number") throw new ProtocolError("version must be a number");
    msg.version = record.version;
  }
  for (const key of ["name", "frame", "message"] as const) {
    const value = record[key];
    if (value !== undefined) {
      if (typeof value !== "string") throw new ProtocolError(`${key} must be a string`);
      msg[key] = value;
    }
  }
  if (record.bbox !== undefined) {
    const raw = record.bbox;
    if (
      !Array.isArray(raw) ||
      raw.length !== 4 ||
      !raw.every((v) => typeof v === "number" && Number.isFinite(v))
    ) {
      throw new ProtocolError(`bbox must be 4 finite numbers, got ${JSON.stringify(raw)}`);
    }
    msg.bbox = raw as Box;
  }
  if ((type === "init" || type === "state") && msg.bbox === undefined) {
    throw new ProtocolError(`${type} message requires a bbox`);
  }
  if (type === "init" || type === "frame") {
    if (msg.frame === undefined) throw new ProtocolError(`${type} message requires a frame path`);
  }
  return msg;
}

/** Incremental splitter turning a byte stream into protocol lines. */
export class LineSplitter {
  private buffer = "";

  push(chunk: string | Buffer): string[] {
    this.buffer += chunk.toString();
    const parts = this.buffer.split("\n");
    this.buffer = parts.pop() ?? "";
    return parts.filter((p) => p.length > 0);
  }
}

/** Frame index from a canonical zero-padded image name, if present. */
export function frameIndexFromPath(framePath: string): number | null {
  const base = framePath.split("/").pop() ?? framePath;
  const m = base.match(/(\d+)(?:\.\w+)?$/);
  return m ? parseInt(m[1], 10) : null;
}
