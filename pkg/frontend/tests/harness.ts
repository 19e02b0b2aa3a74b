// Spawns a real ctxpipe server over a scratch workspace and seeds the
// report-pipeline scenario through the HTTP API (the console's only
// channel into the system).

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { connect } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { Client } from "../src/api.js";
import type { Manifest } from "../src/types.js";

export const TOKEN = "console-test-token";
export const PID = "P-REPORT-PAPER";

export interface LiveServer {
  base: string;
  port: number;
  client: Client;
  stop(): void;
}

function element(
  id: string,
  role: string,
  label: string,
  tokens: number,
  extra: Record<string, unknown> = {},
): Record<string, unknown> {
  return {
    element_id: id,
    role,
    source_kind: "file",
    label,
    content_ref: `refs/${id}.md`,
    token_estimate: tokens,
    reviewed: true,
    ...extra,
  };
}

export function stageManifests(pipelineId: string): Record<string, Manifest> {
  const make = (
    packageId: string,
    stage: string,
    elements: Record<string, unknown>[],
  ): Manifest =>
    ({
      package_id: packageId,
      pipeline_id: pipelineId,
      stage,
      elements,
    }) as unknown as Manifest;
  return {
    reviewer: make("PKG-R", "reviewer", [
      element("E1", "authority", "source corpus", 1200),
      element("E2", "rubric", "review rubric", 200),
      element("E9", "metadata", "status summary", 60),
    ]),
    design: make("PKG-D", "design", [
      element("E1", "authority", "source corpus", 1200),
      element("E2", "rubric", "outline rubric", 200),
    ]),
    builder: make("PKG-B", "builder", [
      element("E1", "authority", "design outline", 900, {
        tags: ["design_authority"],
      }),
      element("E2", "rubric", "draft rubric", 200),
    ]),
    auditor: make("PKG-A", "auditor", [
      element("E1", "authority", "design outline", 900, {
        tags: ["design_authority"],
      }),
      element("E2", "rubric", "audit rubric", 200),
    ]),
  };
}

// Raw TCP probe first: a fetch against a closed port would get logged by
// the DOM environment even when caught, which clutters test output.
function portOpen(port: number): Promise<boolean> {
  return new Promise((resolve) => {
    const sock = connect({ port, host: "127.0.0.1" }, () => {
      sock.destroy();
      resolve(true);
    });
    sock.on("error", () => resolve(false));
    sock.setTimeout(500, () => {
      sock.destroy();
      resolve(false);
    });
  });
}

async function waitForHealth(base: string, port: number): Promise<void> {
  for (let i = 0; i < 100; i++) {
    if (await portOpen(port)) {
      const resp = await fetch(`${base}/api/v1/health`);
      if (resp.ok) return;
    }
    await new Promise((r) => setTimeout(r, 100));
  }
  throw new Error(`server at ${base} never became healthy`);
}

export async function startServer(fixedPort?: number): Promise<LiveServer> {
  const workspace = mkdtempSync(join(tmpdir(), "ctxpipe-console-"));
  execFileSync("ctxpipe", ["init"], {
    env: { ...process.env, CTXPIPE_WORKSPACE: workspace },
  });
  const port = fixedPort ?? 21000 + Math.floor(Math.random() * 6000);
  const child: ChildProcess = spawn(
    "ctxpipe",
    ["serve", "--port", String(port)],
    {
      env: {
        ...process.env,
        CTXPIPE_WORKSPACE: workspace,
        CTXPIPE_TOKEN: TOKEN,
      },
      stdio: "ignore",
    },
  );
  const base = `http://127.0.0.1:${port}`;
  try {
    await waitForHealth(base, port);
  } catch (err) {
    child.kill();
    rmSync(workspace, { recursive: true, force: true });
    throw err;
  }
  return {
    base,
    port,
    client: new Client(base, TOKEN),
    stop() {
      child.kill();
      rmSync(workspace, { recursive: true, force: true });
    },
  };
}

// Drives the pipeline to "auditor open": three stages complete under one
// tool, the audit begun under a different one.
export async function seedReportScenario(client: Client): Promise<void> {
  await client.createPipeline({ project: "REPORT", domain: "PAPER", scale: "sprint" });
  const manifests = stageManifests(PID);
  for (const stage of ["reviewer", "design", "builder", "auditor"]) {
    await client.attachPackage(PID, manifests[stage]!);
  }
  const claude = { name: "Claude", type: "generalist_llm" };
  const pkg: Record<string, string> = {
    reviewer: "PKG-R",
    design: "PKG-D",
    builder: "PKG-B",
    auditor: "PKG-A",
  };
  for (const stage of ["reviewer", "design", "builder"]) {
    const out = await client.beginStage(PID, {
      stage,
      tool: claude,
      package_id: pkg[stage]!,
    });
    await client.completeStage(PID, out.record.record_id, {
      artifact: `${stage}.md`,
    });
  }
  await client.beginStage(PID, {
    stage: "auditor",
    tool: { name: "ChatGPT", type: "generalist_llm" },
    package_id: "PKG-A",
  });
}

// Polls until `probe` stops throwing / returns truthy; for DOM settling.
export async function until<T>(
  probe: () => T | null | undefined | false,
  timeoutMs = 5000,
): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  let lastErr: unknown = null;
  for (;;) {
    try {
      const got = probe();
      if (got) return got;
    } catch (err) {
      lastErr = err;
    }
    if (Date.now() > deadline) {
      throw new Error(
        `condition not met within ${timeoutMs}ms` +
          (lastErr ? `: ${String(lastErr)}` : ""),
      );
    }
    await new Promise((r) => setTimeout(r, 50));
  }
}
