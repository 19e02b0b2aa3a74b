import { badge, clear, el, option } from "../dom.js";
import { toast, withBusyRetry } from "../toast.js";
import type { Ctx } from "../context.js";
import type { PipelineSummary } from "../types.js";

function card(ctx: Ctx, p: PipelineSummary): HTMLElement {
  const link = el("a", { href: `#/pipelines/${p.pipeline_id}` }, p.pipeline_id);
  return el(
    "article",
    { class: "card pipeline-card", "data-pipeline": p.pipeline_id },
    el("h3", {}, link, " ", badge(p.status, p.status)),
    el(
      "p",
      { class: "meta" },
      `${p.scale} · ${p.branches.length} branch${p.branches.length === 1 ? "" : "es"}`,
      ` · ${p.records} records · ${p.findings} findings`,
    ),
    el(
      "p",
      { class: "meta" },
      el("a", { href: `#/pipelines/${p.pipeline_id}/trail` }, "trail"),
    ),
  );
}

function createForm(ctx: Ctx): HTMLElement {
  const project = el("input", { name: "project", placeholder: "PROJECT" });
  const domain = el("input", { name: "domain", placeholder: "DOMAIN" });
  const scale = el("select", { name: "scale" });
  scale.append(option("task"), option("sprint"));
  const form = el(
    "form",
    { class: "create-form" },
    el("h3", {}, "New pipeline"),
    el("label", {}, "Project ", project),
    el("label", {}, "Domain ", domain),
    el("label", {}, "Scale ", scale),
    el("button", { type: "submit" }, "Create"),
  );
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void withBusyRetry("create pipeline", async () => {
      const created = await ctx.api.createPipeline({
        project: project.value,
        domain: domain.value,
        scale: scale.value,
      });
      toast(`created ${created.pipeline_id}`);
      await ctx.navigate(`/pipelines/${created.pipeline_id}`);
    });
  });
  return form;
}

export async function renderDashboard(root: HTMLElement, ctx: Ctx): Promise<void> {
  clear(root);
  root.append(el("h2", {}, "Pipelines"));
  let listing;
  try {
    listing = await ctx.api.listPipelines();
  } catch (err) {
    const retry = el("button", { type: "button" }, "Retry");
    retry.addEventListener("click", () => void ctx.refresh());
    root.append(
      el(
        "div",
        { class: "banner banner-error", role: "alert" },
        `Service unreachable: ${String(err instanceof Error ? err.message : err)} `,
        retry,
      ),
    );
    return;
  }
  if (listing.pipelines.length === 0) {
    root.append(
      el(
        "p",
        { class: "empty-state" },
        "No pipelines yet. Create one to get started.",
      ),
    );
  } else {
    root.append(
      el("div", { class: "cards" }, ...listing.pipelines.map((p) => card(ctx, p))),
    );
  }
  root.append(createForm(ctx));
}
