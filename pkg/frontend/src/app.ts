/**
 * Application shell: login with passphrase plus a locally imported key
 * (raw seed hex; encrypted key containers need a scrypt provider and are
 * wired in by the host page), then hash-routed views over the /v1 API.
 */

import { ApiClient } from "./api.js";
import { LocalSigner } from "./signer.js";
import { renderDashboard } from "./views/dashboard.js";
import { WorkbenchController } from "./views/workbench.js";

interface AppState {
  api: ApiClient;
  signer: LocalSigner | null;
  workbench: WorkbenchController | null;
}

export function startApp(root: HTMLElement, base = ""): AppState {
  const state: AppState = { api: new ApiClient(base), signer: null, workbench: null };

  async function route(): Promise<void> {
    const hash = location.hash || "#/login";
    if (!state.api.token && hash !== "#/login") {
      location.hash = "#/login";
      return;
    }
    if (hash === "#/login") {
      renderLogin();
    } else if (hash === "#/workbench") {
      state.workbench = new WorkbenchController(state.api, state.signer!, root);
      await state.workbench.refresh();
    } else if (hash === "#/dashboard") {
      renderDashboard(root, await state.api.dashboard());
    } else {
      root.textContent = "Not found.";
    }
  }

  function renderLogin(): void {
    root.innerHTML = `
      <h2>Sign in</h2>
      <form data-role="login">
        <label>User id <input name="user" autocomplete="username"></label>
        <label>Passphrase <input name="passphrase" type="password"></label>
        <label>Private key seed (hex)
          <input name="seed" placeholder="kept local, never sent"></label>
        <button type="submit">Sign in</button>
        <p class="error" data-role="login-error"></p>
      </form>`;
    const form = root.querySelector("form")!;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const data = new FormData(form as HTMLFormElement);
      void (async () => {
        try {
          const user = String(data.get("user") ?? "");
          state.signer = await LocalSigner.fromSeedHex(user, String(data.get("seed") ?? ""));
          await state.api.login(user, String(data.get("passphrase") ?? ""));
          location.hash = "#/workbench";
          await route();
        } catch (error) {
          const slot = root.querySelector('[data-role="login-error"]')!;
          slot.textContent = error instanceof Error ? error.message : String(error);
        }
      })();
    });
  }

  window.addEventListener("hashchange", () => void route());
  void route();
  return state;
}

declare global {
  interface Window {
    xafundStart: typeof startApp;
  }
}

if (typeof window !== "undefined") {
  window.xafundStart = startApp;
}
