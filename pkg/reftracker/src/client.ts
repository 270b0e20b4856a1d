/**
 * Client loop: answer an engine's protocol messages with policy replies.
 *
 * Exactly one state goes out per init/frame; quit (or a clean stream
 * end) finishes the session with exit status 0; a protocol violation
 * from the engine produces an error message on the channel and a nonzero
 * status. On every init the internal frame counter resets to the init
 * frame's index (parsed from the canonical zero-padded image name, with
 * a running counter as fallback for non-numeric names).
 */

import type { Policy } from "./policy.js";
import {
  LineSplitter,
  Message,
  ProtocolError,
  decode,
  encode,
  frameIndexFromPath,
} from "./protocol.js";

export interface LineChannel {
  writeLine(line: string): void;
  onLine(handler: (line: string) => void): void;
  onEnd(handler: () => void): void;
  close(): void;
}

export function clientLoop(
  channel: LineChannel,
  policy: Policy,
  name?: string,
): Promise<number> {
  const trackerName = name ?? policy.kind;
  let nextIndex = 0;

  const send = (msg: Message) => channel.writeLine(encode(msg));

  return new Promise((resolve) => {
    let settled = false;
    const finish = (status: number) => {
      if (!settled) {
        settled = true;
        channel.close();
        resolve(status);
      }
    };
    const violate = (detail: string) => {
      try {
        send({ type: "error", message: detail });
      } catch {
        // channel may already be gone; the exit status carries the news
      }
      finish(1);
    };

    channel.onLine((line) => {
      if (settled) return;
      let msg: Message;
      try {
        msg = decode(line);
      } catch (err) {
        violate((err as ProtocolError).message);
        return;
      }
      switch (msg.type) {
        case "hello":
          send({ type: "hello", name: trackerName });
          break;
        case "init": {
          const index = frameIndexFromPath(msg.frame!) ?? nextIndex;
          nextIndex = index + 1;
          const box = policy.onInit(index, msg.bbox!);
          send({ type: "state", bbox: box });
          break;
        }
        case "frame": {
          const index = frameIndexFromPath(msg.frame!) ?? nextIndex;
          nextIndex = index + 1;
          send({ type: "state", bbox: policy.reply(index) });
          break;
        }
        case "quit":
          finish(0);
          break;
        case "error":
          violate(`engine reported: ${msg.message ?? "unknown error"}`);
          break;
        default:
          violate(`unexpected ${msg.type} message from engine`);
      }
    });
    channel.onEnd(() => finish(0));
  });
}

/** Channel over a pair of byte streams (stdio or a socket). */
export function streamChannel(
  input: NodeJS.ReadableStream,
  output: NodeJS.WritableStream,
  closeStreams: () => void = () => {},
): LineChannel {
  const splitter = new LineSplitter();
  let lineHandler: (line: string) => void = () => {};
  let endHandler: () => void = () => {};
  input.on("data", (chunk: Buffer) => {
    for (const line of splitter.push(chunk)) lineHandler(line);
  });
  input.on("end", () => endHandler());
  input.on("error", () => endHandler());
  return {
    writeLine: (line) => output.write(line + "\n"),
    onLine: (handler) => {
      lineHandler = handler;
    },
    onEnd: (handler) => {
      endHandler = handler;
    },
    close: closeStreams,
  };
}
