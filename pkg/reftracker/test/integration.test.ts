/**
 * Full-stack conformance: every policy completes OPE and R-OPE sessions
 * against the real evaluation engine over both transports, and the
 * scored outcomes match the analytically known results (oracle: zero
 * restarts, success AUC exactly 1; offset(3,4): precision step exactly
 * at 5 px; scripted fail 100..109: one restart at frame 110).
 *
 * Requires python3 with the engine package importable; skipped when the
 * interpreter is unavailable.
 */

import { execFileSync, spawn, spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync, mkdirSync } from "node:fs";
import net from "node:net";
import { tmpdir } from "node:os";
import path from "node:path";

import { describe, expect, it } from "vitest";

const MAIN = path.resolve(__dirname, "..", "dist", "main.js");
const REPO = path.resolve(__dirname, "..", "..");
const PYTHON = process.env.PYTHON ?? "python3";
const PY_ENV = {
  ...process.env,
  PYTHONPATH: `${path.join(REPO, "src")}${path.delimiter}${process.env.PYTHONPATH ?? ""}`,
};

function havePython(): boolean {
  const probe = spawnSync(PYTHON, ["-c", "import sotverse"], { env: PY_ENV });
  return probe.status === 0;
}

function makeSequence(n: number): { dir: string; manifest: string; gt: string } {
  const root = mkdtempSync(path.join(tmpdir(), "rt-integration-"));
  const seqDir = path.join(root, "seq");
  mkdirSync(seqDir);
  const rows = Array.from({ length: n }, (_, t) => `${10 + t},20,12,10`);
  const gt = path.join(seqDir, "groundtruth.csv");
  writeFileSync(gt, rows.join("\n") + "\n");
  writeFileSync(path.join(seqDir, "meta.json"), JSON.stringify({ width: 64, height: 48 }));
  const manifest = path.join(root, "manifest.json");
  writeFileSync(
    manifest,
    JSON.stringify({
      schema: 1,
      id: "synthetic",
      kind: "normal",
      sequences: [{ id: "seq", dir: "seq" }],
    }),
  );
  return { dir: root, manifest, gt };
}

function engineArgs(manifest: string, mechanism: string, out: string): string[] {
  return [
    "-m", "sotverse", "eval",
    "--manifest", manifest,
    "--mechanism", mechanism,
    "--out", out,
    "--timeout", "60",
  ];
}

function runStdio(manifest: string, mechanism: string, out: string, policy: string): void {
  const cmd = `${process.execPath} ${MAIN} --policy ${policy}`;
  execFileSync(PYTHON, [...engineArgs(manifest, mechanism, out), "--tracker-cmd", cmd], {
    env: PY_ENV,
    stdio: ["ignore", "ignore", "inherit"],
    timeout: 120_000,
  });
}

async function freePort(): Promise<number> {
  return new Promise((resolve) => {
    const server = net.createServer();
    server.listen(0, "127.0.0.1", () => {
      const port = (server.address() as net.AddressInfo).port;
      server.close(() => resolve(port));
    });
  });
}

async function runTcp(
  manifest: string,
  mechanism: string,
  out: string,
  policy: string,
): Promise<void> {
  const port = await freePort();
  const engine = spawn(
    PYTHON,
    [...engineArgs(manifest, mechanism, out), "--listen", `127.0.0.1:${port}`],
    { env: PY_ENV, stdio: ["ignore", "ignore", "inherit"] },
  );
  const client = spawn(
    process.execPath,
    [MAIN, "--policy", policy, "--connect", `127.0.0.1:${port}`],
    { stdio: ["ignore", "ignore", "inherit"] },
  );
  const [engineCode, clientCode] = await Promise.all([
    new Promise<number>((resolve) => engine.on("exit", (c) => resolve(c ?? -1))),
    new Promise<number>((resolve) => client.on("exit", (c) => resolve(c ?? -1))),
  ]);
  expect(engineCode).toBe(0);
  expect(clientCode).toBe(0);
}

function report(runs: string, out: string): any {
  execFileSync(PYTHON, ["-m", "sotverse", "report", "--runs", runs, "--out", out], {
    env: PY_ENV,
    stdio: ["ignore", "ignore", "inherit"],
    timeout: 60_000,
  });
  return JSON.parse(readFileSync(path.join(out, "report.json"), "utf-8"));
}

function runMeta(out: string): any {
  return JSON.parse(readFileSync(path.join(out, "seq.meta.json"), "utf-8"));
}

describe.skipIf(!havePython())("engine integration", () => {
  it("oracle: OPE and R-OPE over both transports, AUC exactly 1, zero restarts", async () => {
    const { dir, manifest, gt } = makeSequence(100);
    const policy = `oracle:${gt}`;

    runStdio(manifest, "ope", path.join(dir, "runs", "ope-stdio"), policy);
    const doc = report(path.join(dir, "runs", "ope-stdio"), path.join(dir, "report-oracle"));
    const entry = doc.results["oracle"]["synthetic"]["ope"];
    expect(entry.headlines.success_auc).toBe(1.0);
    expect(entry.headlines.precision).toBe(1.0);

    runStdio(manifest, "rope", path.join(dir, "runs", "rope-stdio"), policy);
    const meta = runMeta(path.join(dir, "runs", "rope-stdio"));
    expect(meta.restarts).toEqual([]);
    expect(meta.segments).toEqual([[0, 100]]);

    await runTcp(manifest, "ope", path.join(dir, "runs", "ope-tcp"), policy);
    await runTcp(manifest, "rope", path.join(dir, "runs", "rope-tcp"), policy);
    const tcpMeta = runMeta(path.join(dir, "runs", "rope-tcp"));
    expect(tcpMeta.restarts).toEqual([]);
    // identical session content over both transports
    expect(readFileSync(path.join(dir, "runs", "ope-tcp", "seq.csv"), "utf-8")).toBe(
      readFileSync(path.join(dir, "runs", "ope-stdio", "seq.csv"), "utf-8"),
    );
  }, 120_000);

  it("offset(3,4): precision curve steps exactly at 5 px", async () => {
    const { dir, manifest, gt } = makeSequence(100);
    const policy = `offset:3,4:${gt}`;

    runStdio(manifest, "ope", path.join(dir, "runs", "ope-stdio"), policy);
    const doc = report(path.join(dir, "runs", "ope-stdio"), path.join(dir, "report-offset"));
    const entry = doc.results["offset"]["synthetic"]["ope"];
    const curve = entry.curves.precision;
    curve.thresholds.forEach((theta: number, i: number) => {
      expect(curve.values[i]).toBe(theta >= 5 ? 1.0 : 0.0);
    });

    runStdio(manifest, "rope", path.join(dir, "runs", "rope-stdio"), policy);
    await runTcp(manifest, "ope", path.join(dir, "runs", "ope-tcp"), policy);
    await runTcp(manifest, "rope", path.join(dir, "runs", "rope-tcp"), policy);
  }, 120_000);

  it("static: completes OPE and R-OPE over both transports", async () => {
    const { dir, manifest } = makeSequence(100);
    runStdio(manifest, "ope", path.join(dir, "runs", "ope-stdio"), "static");
    runStdio(manifest, "rope", path.join(dir, "runs", "rope-stdio"), "static");
    await runTcp(manifest, "ope", path.join(dir, "runs", "ope-tcp"), "static");
    await runTcp(manifest, "rope", path.join(dir, "runs", "rope-tcp"), "static");
    const rows = readFileSync(path.join(dir, "runs", "ope-stdio", "seq.csv"), "utf-8")
      .trim()
      .split("\n");
    expect(rows).toHaveLength(100);
    expect(new Set(rows).size).toBe(1); // the init box, repeated
  }, 120_000);

  it("scripted fail 100..109: one restart at frame 110", async () => {
    const { dir, manifest, gt } = makeSequence(200);
    const rows = readFileSync(gt, "utf-8").trim().split("\n");
    const plan = path.join(dir, "plan.csv");
    writeFileSync(
      plan,
      rows
        .map((row, t) => (t >= 100 && t < 110 ? `${t},fail` : `${t},${row}`))
        .join("\n") + "\n",
    );
    const policy = `scripted:${plan}`;

    runStdio(manifest, "rope", path.join(dir, "runs", "rope-stdio"), policy);
    const meta = runMeta(path.join(dir, "runs", "rope-stdio"));
    expect(meta.restarts).toEqual([[109, 110]]);
    expect(meta.segments).toEqual([[0, 100], [110, 200]]);

    runStdio(manifest, "ope", path.join(dir, "runs", "ope-stdio"), policy);
    await runTcp(manifest, "rope", path.join(dir, "runs", "rope-tcp"), policy);
    await runTcp(manifest, "ope", path.join(dir, "runs", "ope-tcp"), policy);
    const tcpMeta = runMeta(path.join(dir, "runs", "rope-tcp"));
    expect(tcpMeta.restarts).toEqual([[109, 110]]);
  }, 120_000);
});
