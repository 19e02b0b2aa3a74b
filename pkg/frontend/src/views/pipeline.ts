import { ApiError } from "../api.js";
import { badge, clear, el, option } from "../dom.js";
import { toast, withBusyRetry } from "../toast.js";
import { findingForm } from "./finding.js";
import type { Ctx } from "../context.js";
import type { PipelineDetail, StageRecordView, Warning } from "../types.js";

// Confirmation text from the last finding submit, keyed by pipeline id;
// consumed by the first render after the refresh.
const flash = new Map<string, string>();

function describeWarnings(warnings: Warning[]): void {
  for (const w of warnings) toast(`warning ${w.code}: ${w.message}`);
}

function recordCard(rec: StageRecordView): HTMLElement {
  const lines: HTMLElement[] = [];
  if (rec.tool) lines.push(el("p", { class: "meta" }, `tool: ${rec.tool.name}`));
  if (rec.package_id)
    lines.push(el("p", { class: "meta" }, `package: ${rec.package_id}`));
  if (rec.output_artifact)
    lines.push(el("p", { class: "meta" }, `artifact: ${rec.output_artifact}`));
  if (rec.waiver_reason)
    lines.push(el("p", { class: "meta" }, `waived: ${rec.waiver_reason}`));
  if (rec.finding_ids.length)
    lines.push(el("p", { class: "meta" }, `findings: ${rec.finding_ids.join(", ")}`));
  return el(
    "div",
    { class: "record-card", "data-record": rec.record_id },
    el("h4", {}, `${rec.stage_label} `, badge(rec.status, rec.status)),
    el("p", { class: "meta" }, rec.record_id),
    ...lines,
  );
}

function lane(branch: string, records: StageRecordView[]): HTMLElement {
  return el(
    "section",
    { class: "lane", "data-branch": branch },
    el("h3", {}, `branch ${branch}`),
    ...records.map(recordCard),
  );
}

// A rejected gate action is a rule outcome; show the server's words in a
// banner chip next to the lanes rather than only in a transient toast.
function ruleBanner(root: HTMLElement, err: ApiError): void {
  const slot = root.querySelector(".rule-banner-slot");
  if (!slot) return;
  const note = el(
    "div",
    { class: "banner banner-rule", role: "alert" },
    badge("Blocked-by-rule", "blocked"),
    ` ${err.code}: ${err.message}`,
  );
  slot.replaceChildren(note);
}

function stageControls(
  root: HTMLElement,
  ctx: Ctx,
  detail: PipelineDetail,
): HTMLElement {
  const branches = Object.keys(detail.branches);
  const packages = Object.keys(detail.packages);
  const openRecords = detail.records.filter((r) => r.status === "open");

  const gateAction = (label: string, action: () => Promise<void>) => {
    void withBusyRetry(label, async () => {
      try {
        await action();
      } catch (err) {
        if (err instanceof ApiError && !err.busy) {
          ruleBanner(root, err);
          return;
        }
        throw err;
      }
    });
  };

  // begin
  const beginStage = el("select", {});
  beginStage.append(
    option("reviewer", "Reviewer"),
    option("design", "Design"),
    option("builder", "Builder"),
    option("auditor", "Auditor"),
  );
  const beginBranch = el("select", {});
  for (const b of branches) beginBranch.append(option(b));
  const toolName = el("input", { placeholder: "tool name" });
  const toolType = el("select", {});
  toolType.append(
    option("generalist_llm", "generalist LLM"),
    option("specialized_agent", "specialized agent"),
    option("code_generator", "code generator"),
    option("classification_system", "classification system"),
  );
  const beginPackage = el("select", {});
  for (const p of packages) beginPackage.append(option(p));
  const beginForm = el(
    "form",
    { class: "control begin-form" },
    el("h4", {}, "Begin stage"),
    el("label", {}, "Stage ", beginStage),
    el("label", {}, "Branch ", beginBranch),
    el("label", {}, "Tool ", toolName),
    el("label", {}, "Type ", toolType),
    el("label", {}, "Package ", beginPackage),
    el("button", { type: "submit" }, "Begin"),
  );
  beginForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    gateAction("begin stage", async () => {
      const out = await ctx.api.beginStage(detail.pipeline_id, {
        stage: beginStage.value,
        branch: beginBranch.value,
        tool: { name: toolName.value, type: toolType.value },
        package_id: beginPackage.value,
      });
      describeWarnings(out.warnings);
      toast(`began ${out.record.record_id}`);
      await ctx.refresh();
    });
  });

  // complete
  const completeRecord = el("select", {});
  for (const r of openRecords) completeRecord.append(option(r.record_id));
  const artifact = el("input", { placeholder: "artifact ref" });
  const completeForm = el(
    "form",
    { class: "control complete-form" },
    el("h4", {}, "Complete stage"),
    el("label", {}, "Record ", completeRecord),
    el("label", {}, "Artifact ", artifact),
    el("button", { type: "submit" }, "Complete"),
  );
  completeForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    gateAction("complete stage", async () => {
      const out = await ctx.api.completeStage(
        detail.pipeline_id,
        completeRecord.value,
        { artifact: artifact.value },
      );
      describeWarnings(out.warnings);
      toast(`completed ${out.record.record_id}`);
      await ctx.refresh();
    });
  });

  // skip
  const skipStage = el("select", {});
  skipStage.append(
    option("reviewer", "Reviewer"),
    option("design", "Design"),
    option("auditor", "Auditor"),
  );
  const skipBranch = el("select", {});
  for (const b of branches) skipBranch.append(option(b));
  const reason = el("input", { placeholder: "reason" });
  const skipForm = el(
    "form",
    { class: "control skip-form" },
    el("h4", {}, "Skip stage"),
    el("label", {}, "Stage ", skipStage),
    el("label", {}, "Branch ", skipBranch),
    el("label", {}, "Reason ", reason),
    el("button", { type: "submit" }, "Skip"),
  );
  skipForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    gateAction("skip stage", async () => {
      const out = await ctx.api.skipStage(detail.pipeline_id, {
        stage: skipStage.value,
        branch: skipBranch.value,
        reason: reason.value,
      });
      describeWarnings(out.warnings);
      toast(`waived ${out.record.record_id}`);
      await ctx.refresh();
    });
  });

  // attach package
  const manifestText = el("textarea", {
    placeholder: '{"package_id": ..., "elements": [...]}',
    class: "manifest-input",
  });
  const attachForm = el(
    "form",
    { class: "control attach-form" },
    el("h4", {}, "Attach package"),
    el("label", {}, "Manifest JSON ", manifestText),
    el("button", { type: "submit" }, "Attach"),
  );
  attachForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    gateAction("attach package", async () => {
      const manifest = JSON.parse(manifestText.value);
      const view = await ctx.api.attachPackage(detail.pipeline_id, manifest);
      toast(`attached ${view.manifest.package_id} (${view.size_class})`);
      await ctx.refresh();
    });
  });

  // close
  const closeButton = el("button", { type: "button", class: "close-button" }, "Close pipeline");
  closeButton.addEventListener("click", () => {
    gateAction("close pipeline", async () => {
      try {
        const out = await ctx.api.closePipeline(detail.pipeline_id);
        describeWarnings(out.warnings);
        toast(`closed ${out.pipeline_id}`);
      } catch (err) {
        if (err instanceof ApiError && err.code === "CONFIRM_REQUIRED") {
          const go = window.confirm(`${err.message} Close anyway?`);
          if (!go) return;
          const out = await ctx.api.closePipeline(detail.pipeline_id, true);
          describeWarnings(out.warnings);
          toast(`closed ${out.pipeline_id}`);
        } else {
          throw err;
        }
      }
      await ctx.refresh();
    });
  });

  return el(
    "div",
    { class: "controls" },
    beginForm,
    completeForm,
    skipForm,
    attachForm,
    closeButton,
  );
}

export async function renderPipeline(
  root: HTMLElement,
  ctx: Ctx,
  pipelineId: string,
): Promise<void> {
  clear(root);
  const [detail, routesDoc] = await Promise.all([
    ctx.api.getPipeline(pipelineId),
    ctx.api.findingRoutes(),
  ]);

  root.append(
    el(
      "h2",
      {},
      detail.pipeline_id,
      " ",
      badge(detail.status, detail.status),
      el("span", { class: "meta" }, ` ${detail.scale}`),
    ),
    el(
      "p",
      { class: "meta" },
      el("a", { href: `#/pipelines/${pipelineId}/trail` }, "audit trail"),
      " · packages: ",
      ...Object.keys(detail.packages).flatMap((pkg, i) => [
        i > 0 ? ", " : "",
        el("a", { href: `#/pipelines/${pipelineId}/packages/${pkg}` }, pkg),
      ]),
    ),
    el("div", { class: "rule-banner-slot" }),
  );

  const branches = Object.keys(detail.branches);
  root.append(
    el(
      "div",
      { class: "lanes" },
      ...branches.map((b) =>
        lane(b, detail.records.filter((r) => r.branch_id === b)),
      ),
    ),
  );

  if (detail.findings.length) {
    root.append(
      el("h3", {}, "Findings"),
      el(
        "ul",
        { class: "findings" },
        ...detail.findings.map((f) =>
          el(
            "li",
            { "data-finding": f.finding_id },
            `${f.finding_id} ${f.severity_label} ${f.category_label}`,
            ` -> ${f.target_stage_label}`,
            f.record_id ? ` (record ${f.record_id})` : "",
            `: ${f.description}`,
          ),
        ),
      ),
    );
  }

  const pending = flash.get(pipelineId) ?? null;
  flash.delete(pipelineId);
  root.append(
    findingForm(ctx, pipelineId, branches, routesDoc.routes, pending, (text) => {
      flash.set(pipelineId, text);
    }),
  );

  if (detail.status === "active") {
    root.append(stageControls(root, ctx, detail));
  }

  if (detail.close_warnings.length) {
    root.append(
      el(
        "p",
        { class: "meta close-warnings" },
        `close warnings: ${detail.close_warnings.join("; ")}`,
      ),
    );
  }
}
