#!/usr/bin/env node
/**
 * reftracker --policy SPEC [--connect HOST:PORT] [--name NAME]
 *
 * Speaks the evaluation wire protocol on stdin/stdout by default, or
 * connects to an engine listening on HOST:PORT. Policies: oracle:GT.csv,
 * offset:DX,DY:GT.csv, static, scripted:PLAN.csv.
 */

import net from "node:net";

import { clientLoop, streamChannel } from "./client.js";
import { UsageError, makePolicy } from "./policy.js";

interface Args {
  policy: string;
  connect?: string;
  name?: string;
}

function parseArgs(argv: string[]): Args {
  let policy: string | undefined;
  let connect: string | undefined;
  let name: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--policy") policy = argv[++i];
    else if (arg === "--connect") connect = argv[++i];
    else if (arg === "--name") name = argv[++i];
    else throw new UsageError(`unknown argument ${arg}`);
  }
  if (!policy) throw new UsageError("--policy SPEC is required");
  return { policy, connect, name };
}

async function connectWithRetry(host: string, port: number): Promise<net.Socket> {
  let lastError: Error = new Error("no attempt made");
  for (let attempt = 0; attempt < 25; attempt++) {
    try {
      return await new Promise<net.Socket>((resolve, reject) => {
        const sock = net.connect({ host, port }, () => resolve(sock));
        sock.on("error", reject);
      });
    } catch (err) {
      lastError = err as Error;
      await new Promise((r) => setTimeout(r, 200));
    }
  }
  throw new UsageError(`cannot connect to ${host}:${port}: ${lastError.message}`);
}

async function main(): Promise<number> {
  let args: Args;
  let policy;
  try {
    args = parseArgs(process.argv.slice(2));
    policy = makePolicy(args.policy);
  } catch (err) {
    if (err instanceof UsageError) {
      process.stderr.write(`usage error: ${err.message}\n`);
      return 2;
    }
    throw err;
  }
  if (args.connect) {
    const [host, portText] = args.connect.split(":");
    const port = Number(portText);
    if (!host || !Number.isInteger(port)) {
      process.stderr.write(`usage error: bad --connect ${args.connect}\n`);
      return 2;
    }
    const sock = await connectWithRetry(host, port);
    const channel = streamChannel(sock, sock, () => sock.end());
    return clientLoop(channel, policy, args.name);
  }
  const channel = streamChannel(process.stdin, process.stdout);
  return clientLoop(channel, policy, args.name);
}

main().then(
  (status) => process.exit(status),
  (err) => {
    process.stderr.write(`fatal: ${err?.stack ?? err}\n`);
    process.exit(1);
  },
);
