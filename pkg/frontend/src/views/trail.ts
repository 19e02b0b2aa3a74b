import { badge, clear, el } from "../dom.js";
import type { Ctx } from "../context.js";
import type { TrailEvent } from "../types.js";

function eventRow(ev: TrailEvent): HTMLElement {
  const summary = el(
    "summary",
    {},
    el("span", { class: "seq" }, String(ev.seq)),
    ` ${ev.timestamp} `,
    el("strong", {}, ev.kind),
  );
  return el(
    "details",
    { class: "trail-event", "data-kind": ev.kind },
    summary,
    el("pre", {}, JSON.stringify(ev.payload, null, 2)),
  );
}

export async function renderTrail(
  root: HTMLElement,
  ctx: Ctx,
  pipelineId: string,
): Promise<void> {
  clear(root);
  const trail = await ctx.api.getTrail(pipelineId);
  const chain = trail.verify.ok
    ? badge("chain ok", "ok")
    : badge(`broken at seq ${trail.verify.at_seq}: ${trail.verify.reason}`, "broken");
  root.append(
    el("h2", {}, `Audit trail ${pipelineId} `, chain),
    el(
      "p",
      { class: "meta" },
      el("a", { href: `#/pipelines/${pipelineId}` }, "back to pipeline"),
      ` · ${trail.events.length} events`,
    ),
    el("div", { class: "timeline" }, ...trail.events.map(eventRow)),
    el(
      "details",
      { class: "raw-render" },
      el("summary", {}, "rendered trail"),
      el("pre", {}, trail.rendered),
    ),
  );
}
