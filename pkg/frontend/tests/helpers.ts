/**
 * Test harness: spawns a real backend (seeded demo fixture + HTTP API) in a
 * child process and provides fixture signers derived exactly like the
 * backend's demo wallet.
 */

import { spawn, spawnSync, ChildProcess } from "node:child_process";
import { createHash, scryptSync } from "node:crypto";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { ApiClient } from "../src/api.js";
import { bytesToHex, digestOf } from "../src/canonical.js";
import { createPayment, submitPayment } from "../src/flows.js";
import { LocalSigner, ScryptFn } from "../src/signer.js";

const FIXTURE_SEED = "xafund-demo-1";
const PYTHON = process.env.XAFUND_PYTHON ?? "python3";
const REPO_ROOT = join(dirname(fileURLToPath(import.meta.url)), "..", "..");

export const nodeScrypt: ScryptFn = async (passphrase, salt, n, r, p, length) => {
  return new Uint8Array(
    scryptSync(Buffer.from(passphrase), Buffer.from(salt), length, { N: n, r, p }),
  );
};

export function fixtureSeedHex(userId: string): string {
  return bytesToHex(
    new Uint8Array(createHash("sha256").update(`${FIXTURE_SEED}|${userId}`).digest()),
  );
}

export async function fixtureSigner(userId: string): Promise<LocalSigner> {
  return LocalSigner.fromSeedHex(userId, fixtureSeedHex(userId));
}

export interface Backend {
  base: string;
  dataDir: string;
  process: ChildProcess;
  configHash(): Promise<string>;
  stop(): void;
}

export async function startBackend(portOffset: number): Promise<Backend> {
  const port = 8620 + ((process.pid + portOffset * 17) % 300);
  const dataDir = join(mkdtempSync(join(tmpdir(), "xafund-web-")), "data");

  const seeded = spawnSync(
    PYTHON, ["-m", "xafund.cli", "seed", "--data-dir", dataDir, "--json"],
    { cwd: REPO_ROOT, encoding: "utf-8" },
  );
  if (seeded.status !== 0) {
    throw new Error(`seed failed: ${seeded.stdout}\n${seeded.stderr}`);
  }

  const server = spawn(
    PYTHON,
    ["-m", "xafund.cli", "serve", "--data-dir", dataDir,
     "--host", "127.0.0.1", "--port", String(port)],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  const base = `http://127.0.0.1:${port}`;

  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      const response = await fetch(`${base}/v1/time`);
      if (response.status === 401) break; // up, auth required as expected
    } catch {
      /* not up yet */
    }
    if (Date.now() > deadline) {
      server.kill();
      throw new Error("backend did not come up within 30s");
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }

  return {
    base,
    dataDir,
    process: server,
    async configHash() {
      const raw = readFileSync(join(dataDir, "approval_config.json"), "utf-8");
      return digestOf(JSON.parse(raw));
    },
    stop() {
      server.kill("SIGTERM");
    },
  };
}

export async function loginAs(base: string, userId: string): Promise<ApiClient> {
  const api = new ApiClient(base);
  await api.login(userId, `${userId}-pass`);
  return api;
}

export function approvalStep(index: number, kind: string, orgId: string | null) {
  return {
    step_index: index,
    kind,
    org_id: orgId,
    decided_by: null,
    verdict: null,
    signature: null,
    decided_tick: null,
    core_height: null,
  };
}

/** Drive a fresh progress payment to InReview; owner review pending. */
export async function stagePendingPayment(
  backend: Backend, paymentId: string, amount = 6_000_000,
): Promise<void> {
  const api = await loginAs(backend.base, "gc-fin");
  const signer = await fixtureSigner("gc-fin");
  await createPayment(api, signer, {
    paymentId,
    contractId: "C-100",
    projectId: "P-001",
    scenario: "ProjectProgressPayment",
    mode: "Application",
    amount,
    payee: null,
  });
  const chain = [approvalStep(0, "org", "OWN-001"), approvalStep(1, "government", null)];
  await submitPayment(api, signer, paymentId, chain, await backend.configHash());
}
