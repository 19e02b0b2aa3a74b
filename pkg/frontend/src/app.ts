import { ApiError, Client } from "./api.js";
import { clear, el } from "./dom.js";
import { renderDashboard } from "./views/dashboard.js";
import { renderInspector } from "./views/inspector.js";
import { renderPipeline } from "./views/pipeline.js";
import { renderReports } from "./views/reports.js";
import { renderTrail } from "./views/trail.js";
import type { Ctx } from "./context.js";

export interface BootOptions {
  base?: string;
  token?: string | null;
}

export interface AppHandle {
  client: Client;
  navigate(path: string): Promise<void>;
  refresh(): Promise<void>;
}

function currentPath(): string {
  const hash = window.location.hash;
  return hash.startsWith("#") ? hash.slice(1) : hash;
}

// One-page console: the hash is the whole route state.
export function boot(root: HTMLElement, opts: BootOptions = {}): AppHandle {
  const stored =
    opts.token !== undefined
      ? opts.token
      : window.localStorage.getItem("ctxpipe-token");
  const client = new Client(opts.base ?? "", stored ?? null);

  const tokenInput = el("input", {
    type: "password",
    placeholder: "bearer token",
    class: "token-input",
    value: stored ?? "",
  });
  tokenInput.addEventListener("change", () => {
    const value = tokenInput.value || null;
    client.setToken(value);
    if (value) window.localStorage.setItem("ctxpipe-token", value);
    else window.localStorage.removeItem("ctxpipe-token");
    void refresh();
  });

  const main = el("main", { id: "view" });
  clear(root);
  root.append(
    el(
      "header",
      { class: "topbar" },
      el("h1", {}, el("a", { href: "#/" }, "ctxpipe console")),
      el(
        "nav",
        {},
        el("a", { href: "#/" }, "pipelines"),
        " ",
        el("a", { href: "#/reports" }, "reports"),
      ),
      el("label", { class: "token-label" }, "token ", tokenInput),
    ),
    main,
  );

  let renderSeq = 0;
  let suppressHashEvent = false;

  async function render(): Promise<void> {
    const seq = ++renderSeq;
    const path = currentPath() || "/";
    const ctx: Ctx = { api: client, navigate, refresh };
    try {
      const pipelinePkg = path.match(/^\/pipelines\/([^/]+)\/packages\/([^/]+)$/);
      const pipelineTrail = path.match(/^\/pipelines\/([^/]+)\/trail$/);
      const pipeline = path.match(/^\/pipelines\/([^/]+)$/);
      if (path === "/" || path === "") {
        await renderDashboard(main, ctx);
      } else if (pipelinePkg) {
        await renderInspector(main, ctx, pipelinePkg[1]!, pipelinePkg[2]!);
      } else if (pipelineTrail) {
        await renderTrail(main, ctx, pipelineTrail[1]!);
      } else if (pipeline) {
        await renderPipeline(main, ctx, pipeline[1]!);
      } else if (path === "/reports") {
        await renderReports(main, ctx);
      } else {
        clear(main);
        main.append(el("p", { class: "empty-state" }, `No such view: ${path}`));
      }
    } catch (err) {
      if (seq !== renderSeq) return;
      clear(main);
      const retry = el("button", { type: "button" }, "Retry");
      retry.addEventListener("click", () => void refresh());
      const text =
        err instanceof ApiError
          ? `${err.code}: ${err.message}`
          : String(err instanceof Error ? err.message : err);
      main.append(
        el("div", { class: "banner banner-error", role: "alert" }, text, " ", retry),
      );
    }
  }

  async function navigate(path: string): Promise<void> {
    const target = `#${path}`;
    if (window.location.hash !== target) {
      suppressHashEvent = true;
      window.location.hash = target;
    }
    await render();
  }

  async function refresh(): Promise<void> {
    await render();
  }

  window.addEventListener("hashchange", () => {
    if (suppressHashEvent) {
      suppressHashEvent = false;
      return;
    }
    void render();
  });

  void render();
  return { client, navigate, refresh };
}
