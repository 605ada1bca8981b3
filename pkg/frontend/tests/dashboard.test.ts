/**
 * Dashboard fidelity: every rendered figure is string-equal to the raw
 * /v1/dashboard response; the client never recomputes money.
 */

import { beforeAll, afterAll, describe, expect, it } from "vitest";

import { renderDashboard } from "../src/views/dashboard.js";
import { Backend, loginAs, startBackend } from "./helpers.js";

let backend: Backend;

beforeAll(async () => {
  backend = await startBackend(3);
}, 60_000);

afterAll(() => backend?.stop());

describe("dashboard", () => {
  it("renders aggregates string-equal to the API body", async () => {
    const api = await loginAs(backend.base, "gov-rev");
    const raw = JSON.parse(await api.dashboardRaw()) as Record<string, unknown>;
    const data = await api.dashboard();

    const root = document.createElement("main");
    renderDashboard(root, data);

    for (const field of [
      "projects_on_chain", "enterprises", "contracts_on_chain",
      "cumulative_payment", "wages_paid",
    ]) {
      const element = root.querySelector<HTMLElement>(`[data-field="${field}"]`)!;
      expect(element, field).not.toBeNull();
      expect(element.dataset.raw).toBe(String(raw[field]));
      expect(element.textContent).toBe(String(raw[field]));
    }

    const perProject = raw["per_project"] as Record<string, Record<string, unknown>>;
    for (const [projectId, row] of Object.entries(perProject)) {
      const tr = root.querySelector<HTMLElement>(`tr[data-project="${projectId}"]`)!;
      expect(tr, projectId).not.toBeNull();
      for (const field of ["stage", "budget", "funds_allocated"]) {
        const cell = tr.querySelector<HTMLElement>(`[data-field="${field}"]`)!;
        expect(cell.dataset.raw).toBe(String(row[field]));
        expect(cell.textContent).toBe(String(row[field]));
      }
    }

    // the fresh fixture has zero money moved: exact zeros, never "0.0"
    expect(root.querySelector<HTMLElement>('[data-field="cumulative_payment"]')!
      .textContent).toBe("0");
  }, 30_000);
});
