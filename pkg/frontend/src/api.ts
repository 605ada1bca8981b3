/**
 * Typed client for the /v1 API. All money mutations go through signed
 * envelopes produced by the LocalSigner; the client itself is stateless
 * apart from the bearer token.
 */

import { Json } from "./canonical.js";
import { Envelope } from "./signer.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly detail?: unknown,
  ) {
    super(message);
  }
}

export interface SessionInfo {
  token: string;
  user_id: string;
  org_id: string | null;
  role: string;
  expires_tick: number;
}

export interface InboxItem {
  payment_id: string;
  scenario: string;
  mode: string;
  amount: number;
  step_index: number;
  required: { kind: string; org_id: string | null };
  age_ticks: number;
}

export interface DashboardAggregates {
  projects_on_chain: number;
  enterprises: number;
  contracts_on_chain: number;
  cumulative_payment: number;
  wages_paid: number;
  per_project: Record<
    string,
    { name: string; budget: number; stage: string; funds_allocated: number }
  >;
}

export class ApiClient {
  token: string | null = null;

  constructor(readonly base: string, private readonly fetchFn: typeof fetch = fetch) {}

  private headers(): Record<string, string> {
    const out: Record<string, string> = { "content-type": "application/json" };
    if (this.token) out["Authorization"] = `Bearer ${this.token}`;
    return out;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(this.base + path, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    let parsed: unknown = null;
    try {
      parsed = text ? JSON.parse(text) : null;
    } catch {
      parsed = text;
    }
    if (!response.ok) {
      const err = (parsed ?? {}) as { code?: string; message?: string; detail?: unknown };
      throw new ApiError(
        response.status, err.code ?? "HTTP_ERROR", err.message ?? response.statusText,
        err.detail,
      );
    }
    return parsed as T;
  }

  async login(userId: string, passphrase: string): Promise<SessionInfo> {
    const session = await this.request<SessionInfo>("POST", "/v1/auth/login", {
      user_id: userId,
      passphrase,
    });
    this.token = session.token;
    return session;
  }

  time(): Promise<{ tick: number; core_height: number }> {
    return this.request("GET", "/v1/time");
  }

  issueChallenge(operationDigest: string): Promise<{ nonce: string; issued_tick: number }> {
    return this.request("POST", "/v1/challenges", { operation_digest: operationDigest });
  }

  postEnvelope(path: string, envelope: Envelope): Promise<{ tx_id: string; state?: string }> {
    return this.request("POST", path, envelope as unknown as Json);
  }

  inbox(): Promise<{ items: InboxItem[] }> {
    return this.request("GET", "/v1/inbox");
  }

  dashboard(): Promise<DashboardAggregates> {
    return this.request("GET", "/v1/dashboard");
  }

  dashboardRaw(): Promise<string> {
    return this.fetchFn(this.base + "/v1/dashboard", { headers: this.headers() }).then((r) =>
      r.text(),
    );
  }

  payment(paymentId: string): Promise<Record<string, unknown>> {
    return this.request("GET", `/v1/payments/${paymentId}`);
  }

  payments(params: Record<string, string>): Promise<{ payments: Record<string, unknown>[] }> {
    const query = new URLSearchParams(params).toString();
    return this.request("GET", `/v1/payments${query ? "?" + query : ""}`);
  }

  contracts(project?: string): Promise<{ contracts: Record<string, unknown>[] }> {
    return this.request("GET", `/v1/contracts${project ? "?project=" + project : ""}`);
  }

  release(paymentId: string): Promise<Record<string, unknown>> {
    return this.request("POST", `/v1/payments/${paymentId}/release`);
  }

  refreshStatus(paymentId: string): Promise<{ state: string; changed: boolean }> {
    return this.request("POST", `/v1/payments/${paymentId}/status`);
  }
}
