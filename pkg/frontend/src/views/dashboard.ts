/**
 * Government dashboard: a pure pass-through of /v1/dashboard.
 * Every figure is rendered as the exact string of the integer fen the API
 * returned (data-raw carries it verbatim); the yuan rendering next to it is
 * integer formatting, never arithmetic.
 */

import { DashboardAggregates } from "../api.js";
import { fenToYuan } from "../format.js";

export function renderDashboard(root: HTMLElement, data: DashboardAggregates): void {
  root.innerHTML = "";
  const cards = document.createElement("div");
  cards.className = "cards";
  const counters: Array<[string, string, number, boolean]> = [
    ["projects_on_chain", "Projects on chain", data.projects_on_chain, false],
    ["enterprises", "Enterprises", data.enterprises, false],
    ["contracts_on_chain", "Contracts on chain", data.contracts_on_chain, false],
    ["cumulative_payment", "Cumulative payment (fen)", data.cumulative_payment, true],
    ["wages_paid", "Wages paid (fen)", data.wages_paid, true],
  ];
  for (const [field, label, value, money] of counters) {
    const card = document.createElement("div");
    card.className = "card";
    const title = document.createElement("h3");
    title.textContent = label;
    const figure = document.createElement("p");
    figure.className = "figure";
    figure.dataset.field = field;
    figure.dataset.raw = String(value);
    figure.textContent = String(value);
    card.append(title, figure);
    if (money) {
      const yuan = document.createElement("p");
      yuan.className = "yuan";
      yuan.textContent = `¥ ${fenToYuan(value)}`;
      card.append(yuan);
    }
    cards.append(card);
  }
  root.append(cards);

  const table = document.createElement("table");
  table.className = "projects";
  table.innerHTML =
    "<thead><tr><th>Project</th><th>Stage</th><th>Budget (fen)</th>" +
    "<th>Funds allocated (fen)</th><th>Used</th></tr></thead>";
  const body = document.createElement("tbody");
  for (const [projectId, row] of Object.entries(data.per_project).sort()) {
    const tr = document.createElement("tr");
    tr.dataset.project = projectId;

    const name = document.createElement("td");
    name.textContent = `${projectId} — ${row.name}`;
    const stage = document.createElement("td");
    stage.dataset.field = "stage";
    stage.dataset.raw = row.stage;
    stage.textContent = row.stage;
    const budget = document.createElement("td");
    budget.dataset.field = "budget";
    budget.dataset.raw = String(row.budget);
    budget.textContent = String(row.budget);
    const allocated = document.createElement("td");
    allocated.dataset.field = "funds_allocated";
    allocated.dataset.raw = String(row.funds_allocated);
    allocated.textContent = String(row.funds_allocated);
    const used = document.createElement("td");
    // percentage in integer permille to stay off floating point
    const permille = row.budget > 0 ? Math.floor((row.funds_allocated * 1000) / row.budget) : 0;
    used.textContent = `${Math.floor(permille / 10)}.${permille % 10}%`;

    tr.append(name, stage, budget, allocated, used);
    body.append(tr);
  }
  table.append(body);
  root.append(table);
}
