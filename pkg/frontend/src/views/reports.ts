import { clear, el, option, table } from "../dom.js";
import { toast } from "../toast.js";
import type { Ctx } from "../context.js";

const KINDS = ["quality", "authority", "size", "stages"] as const;
type Kind = (typeof KINDS)[number];

async function renderRows(
  ctx: Ctx,
  holder: HTMLElement,
  dataset: string,
  kind: Kind,
  groupBy: string,
): Promise<void> {
  clear(holder);
  if (kind === "quality") {
    const doc = await ctx.api.qualityReport(dataset, groupBy);
    holder.append(
      table(
        [
          "group",
          "total",
          "first pass",
          "iterated",
          "partial",
          "failed",
          "first pass %",
          "final success %",
          "avg iterations",
        ],
        doc.rows.map((r) => [
          r.group,
          String(r.total),
          String(r.first_pass),
          String(r.iterated),
          String(r.partial),
          String(r.failed),
          String(r.first_pass_pct),
          String(r.final_success_pct),
          `${r.avg_is_lower_bound ? ">=" : ""}${r.avg_iterations}`,
        ]),
        { class: "report-table" },
      ),
    );
  } else if (kind === "authority") {
    const doc = await ctx.api.authorityReport(dataset);
    holder.append(
      table(
        ["authority", "total", "first pass", "first pass %"],
        doc.rows.map((r) => [
          r.authority,
          String(r.total),
          String(r.first_pass),
          String(r.first_pass_pct),
        ]),
        { class: "report-table" },
      ),
    );
  } else if (kind === "size") {
    const doc = await ctx.api.sizeReport(dataset);
    holder.append(
      table(
        ["size", "total", "avg iterations", "first pass %"],
        doc.rows.map((r) => [
          r.size,
          String(r.total),
          `${r.avg_is_lower_bound ? ">=" : ""}${r.avg_iterations}`,
          String(r.first_pass_pct),
        ]),
        { class: "report-table" },
      ),
    );
  } else {
    const doc = await ctx.api.stagesReport(dataset);
    holder.append(
      table(
        ["stage", "records"],
        Object.entries(doc.rows).map(([stage, count]) => [stage, String(count)]),
        { class: "report-table" },
      ),
    );
  }
}

export async function renderReports(root: HTMLElement, ctx: Ctx): Promise<void> {
  clear(root);
  root.append(el("h2", {}, "Reports"));
  const listing = await ctx.api.listDatasets();
  if (listing.datasets.length === 0) {
    root.append(
      el("p", { class: "empty-state" }, "No datasets imported. Use the CLI to import one."),
    );
    return;
  }

  const datasetSelect = el("select", { name: "dataset" });
  for (const name of listing.datasets) datasetSelect.append(option(name));
  const kindSelect = el("select", { name: "kind" });
  for (const kind of KINDS) kindSelect.append(option(kind));
  const groupSelect = el("select", { name: "group" });
  groupSelect.append(option("all"), option("tool"));
  const holder = el("div", { class: "report-holder" });

  const refresh = () => {
    void renderRows(
      ctx,
      holder,
      datasetSelect.value,
      kindSelect.value as Kind,
      groupSelect.value,
    ).catch((err) => toast(String(err), "error"));
  };
  datasetSelect.addEventListener("change", refresh);
  kindSelect.addEventListener("change", refresh);
  groupSelect.addEventListener("change", refresh);

  root.append(
    el(
      "div",
      { class: "report-controls" },
      el("label", {}, "Dataset ", datasetSelect),
      el("label", {}, "Report ", kindSelect),
      el("label", {}, "Group by ", groupSelect),
    ),
    holder,
  );
  refresh();
}
