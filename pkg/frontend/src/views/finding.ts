import { ApiError } from "../api.js";
import { el, option } from "../dom.js";
import { withBusyRetry } from "../toast.js";
import type { Ctx } from "../context.js";
import type { FindingRoutes } from "../types.js";

// Auditor finding form. The routing preview and the post-submit
// confirmation are both taken from API responses; the form never decides
// where a category routes. `initialOutcome` carries the confirmation text
// across the refresh that follows a successful submit.
export function findingForm(
  ctx: Ctx,
  pipelineId: string,
  branches: string[],
  routes: FindingRoutes,
  initialOutcome: string | null,
  onRouted: (text: string) => void,
): HTMLElement {
  const severity = el("select", { name: "severity" });
  severity.append(
    option("critical", "Critical"),
    option("major", "Major"),
    option("minor", "Minor"),
  );
  const category = el("select", { name: "category" });
  for (const [value, route] of Object.entries(routes)) {
    category.append(option(value, route.category_label));
  }
  const branch = el("select", { name: "branch" });
  for (const name of branches) branch.append(option(name));
  const description = el("textarea", {
    name: "description",
    placeholder: "What did the audit find?",
  });
  const preview = el("p", { class: "routing-preview" });
  const outcome = el("p", { class: "finding-outcome", "data-state": "idle" });
  if (initialOutcome) {
    outcome.textContent = initialOutcome;
    outcome.dataset.state = "done";
  }

  const showPreview = () => {
    const route = routes[category.value];
    preview.textContent = route ? `Will route to ${route.target_stage_label}` : "";
  };
  category.addEventListener("change", showPreview);
  showPreview();

  const form = el(
    "form",
    { class: "finding-form" },
    el("h3", {}, "Record finding"),
    el("label", {}, "Severity ", severity),
    el("label", {}, "Category ", category),
    el("label", {}, "Branch ", branch),
    el("label", {}, "Description ", description),
    preview,
    el("button", { type: "submit" }, "Record"),
    outcome,
  );
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    outcome.dataset.state = "busy";
    void withBusyRetry("record finding", async () => {
      try {
        const result = await ctx.api.recordFinding(pipelineId, {
          severity: severity.value,
          category: category.value,
          description: description.value,
          branch: branch.value,
        });
        onRouted(
          `${result.finding_id} routed to ${result.target_stage_label}` +
            ` (record ${result.record_id}${result.reopened ? ", reopened" : ""})`,
        );
        await ctx.refresh();
      } catch (err) {
        if (err instanceof ApiError && !err.busy) {
          // e.g. NO_AUDITOR on a branch without an auditor record
          outcome.textContent = `${err.code}: ${err.message}`;
          outcome.dataset.state = "error";
          return;
        }
        outcome.dataset.state = "idle";
        throw err;
      }
    });
  });
  return form;
}
