/** Protocol conformance of the built binary over stdio and TCP. */

import { spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import net from "node:net";
import { tmpdir } from "node:os";
import path from "node:path";

import { describe, expect, it } from "vitest";

import { LineSplitter, Message, decode, encode } from "../src/protocol.js";

const MAIN = path.resolve(__dirname, "..", "dist", "main.js");

function writeGt(n: number): string {
  const dir = mkdtempSync(path.join(tmpdir(), "rt-transport-"));
  const rows = Array.from({ length: n }, (_, i) => `${10 + i},20,12,10`);
  const file = path.join(dir, "gt.csv");
  writeFileSync(file, rows.join("\n") + "\n");
  return file;
}

interface Session {
  send(msg: Message): void;
  next(): Promise<Message>;
  exit: Promise<number>;
}

function stdioSession(args: string[]): Session {
  const proc = spawn(process.execPath, [MAIN, ...args], {
    stdio: ["pipe", "pipe", "inherit"],
  });
  const splitter = new LineSplitter();
  const queue: Message[] = [];
  const waiters: Array<(msg: Message) => void> = [];
  proc.stdout.on("data", (chunk: Buffer) => {
    for (const line of splitter.push(chunk)) {
      const msg = decode(line);
      const waiter = waiters.shift();
      if (waiter) waiter(msg);
      else queue.push(msg);
    }
  });
  return {
    send: (msg) => proc.stdin.write(encode(msg) + "\n"),
    next: () =>
      new Promise((resolve) => {
        const queued = queue.shift();
        if (queued) resolve(queued);
        else waiters.push(resolve);
      }),
    exit: new Promise((resolve) => proc.on("exit", (code) => resolve(code ?? -1))),
  };
}

async function tcpSession(args: string[]): Promise<Session> {
  const server = net.createServer();
  await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
  const port = (server.address() as net.AddressInfo).port;
  const proc = spawn(
    process.execPath,
    [MAIN, ...args, "--connect", `127.0.0.1:${port}`],
    { stdio: ["ignore", "inherit", "inherit"] },
  );
  const sock = await new Promise<net.Socket>((resolve) =>
    server.once("connection", (s) => resolve(s)),
  );
  server.close();
  const splitter = new LineSplitter();
  const queue: Message[] = [];
  const waiters: Array<(msg: Message) => void> = [];
  sock.on("data", (chunk: Buffer) => {
    for (const line of splitter.push(chunk)) {
      const msg = decode(line);
      const waiter = waiters.shift();
      if (waiter) waiter(msg);
      else queue.push(msg);
    }
  });
  return {
    send: (msg) => sock.write(encode(msg) + "\n"),
    next: () =>
      new Promise((resolve) => {
        const queued = queue.shift();
        if (queued) resolve(queued);
        else waiters.push(resolve);
      }),
    exit: new Promise((resolve) => proc.on("exit", (code) => resolve(code ?? -1))),
  };
}

async function runOpeConversation(session: Session, n: number) {
  session.send({ type: "hello", version: 1 });
  const hello = await session.next();
  expect(hello.type).toBe("hello");
  expect(hello.name).toBeTruthy();
  session.send({ type: "init", frame: "frames/000000.ppm", bbox: [10, 20, 12, 10] });
  const initReply = await session.next();
  expect(initReply.type).toBe("state");
  const states: Message[] = [];
  for (let t = 1; t < n; t++) {
    session.send({
      type: "frame",
      frame: `frames/${String(t).padStart(6, "0")}.ppm`,
    });
    const state = await session.next();
    expect(state.type).toBe("state");
    expect(state.bbox).toHaveLength(4);
    states.push(state);
  }
  session.send({ type: "quit" });
  expect(await session.exit).toBe(0);
  return states;
}

describe("stdio transport", () => {
  it("oracle completes a 100-frame session echoing ground truth", async () => {
    const gt = writeGt(100);
    const states = await runOpeConversation(stdioSession(["--policy", `oracle:${gt}`]), 100);
    states.forEach((state, i) => {
      expect(state.bbox).toEqual([10 + i + 1, 20, 12, 10]);
    });
  });

  it("offset displaces every reply by (3,4)", async () => {
    const gt = writeGt(100);
    const states = await runOpeConversation(
      stdioSession(["--policy", `offset:3,4:${gt}`]),
      100,
    );
    states.forEach((state, i) => {
      expect(state.bbox).toEqual([10 + i + 1 + 3, 24, 12, 10]);
    });
  });

  it("bad policy spec exits with usage status", async () => {
    const session = stdioSession(["--policy", "offset:x"]);
    expect(await session.exit).toBe(2);
  });
});

describe("tcp transport", () => {
  it("static completes a 100-frame session over a socket", async () => {
    const session = await tcpSession(["--policy", "static", "--name", "tcp-static"]);
    const states = await runOpeConversation(session, 100);
    states.forEach((state) => expect(state.bbox).toEqual([10, 20, 12, 10]));
  });

  it("scripted follows its plan over a socket", async () => {
    const dir = mkdtempSync(path.join(tmpdir(), "rt-plan-"));
    const plan = path.join(dir, "plan.csv");
    writeFileSync(plan, "0,10,20,12,10\n50,fail\n60,10,20,12,10\n");
    const session = await tcpSession(["--policy", `scripted:${plan}`]);
    const states = await runOpeConversation(session, 100);
    expect(states[48].bbox).toEqual([10, 20, 12, 10]); // frame 49
    expect(states[49].bbox).toEqual([1e6, 1e6, 1, 1]); // frame 50 fails
    expect(states[58].bbox).toEqual([1e6, 1e6, 1, 1]); // frame 59 fails
    expect(states[59].bbox).toEqual([10, 20, 12, 10]); // frame 60 recovers
  });
});
