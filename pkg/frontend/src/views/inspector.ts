import { badge, clear, el, option, table } from "../dom.js";
import { withBusyRetry } from "../toast.js";
import type { Ctx } from "../context.js";
import type { PackageView, Resolution } from "../types.js";

function elementsTable(view: PackageView): HTMLTableElement {
  // Server returns elements already ordered by priority.
  return table(
    ["element", "role", "label", "source", "tokens", "reviewed", "tags"],
    view.elements.map((e) => [
      e.element_id,
      `${e.role_label} (priority ${e.role_priority})`,
      e.label,
      e.source_kind,
      String(e.token_estimate),
      e.reviewed ? "yes" : "no",
      e.tags.join(", "),
    ]),
    { class: "elements-table" },
  );
}

function markWinner(tableNode: HTMLTableElement, res: Resolution): void {
  for (const row of Array.from(tableNode.querySelectorAll("tbody tr"))) {
    row.classList.remove("winner", "loser");
    const id = row.firstElementChild?.textContent;
    if (res.winner !== null && id === res.winner) row.classList.add("winner");
    if (res.loser !== null && id === res.loser) row.classList.add("loser");
  }
}

export async function renderInspector(
  root: HTMLElement,
  ctx: Ctx,
  pipelineId: string,
  packageId: string,
): Promise<void> {
  clear(root);
  const view = await ctx.api.getPackage(pipelineId, packageId);
  const m = view.manifest;

  const chips = view.findings.map((f) =>
    el(
      "span",
      { class: `chip chip-${f.severity}`, title: f.message },
      `${f.code}`,
    ),
  );

  root.append(
    el(
      "h2",
      {},
      `${m.package_id} `,
      badge(view.size_class, "size"),
      el("span", { class: "meta" }, ` ${view.total_tokens} tokens · stage ${m.stage}`),
    ),
    el("p", { class: "meta" }, el("a", { href: `#/pipelines/${pipelineId}` }, "back to pipeline")),
    el("div", { class: "chips" }, ...chips),
  );

  const tableNode = elementsTable(view);
  root.append(tableNode);

  // conflict probe: pick two elements, ask the server who wins
  const selectA = el("select", { name: "a" });
  const selectB = el("select", { name: "b" });
  for (const e of view.elements) {
    selectA.append(option(e.element_id, `${e.element_id} (${e.role_label})`));
    selectB.append(option(e.element_id, `${e.element_id} (${e.role_label})`));
  }
  if (view.elements.length > 1) selectB.selectedIndex = 1;
  const verdict = el("p", { class: "resolution", "data-state": "idle" });
  const resolveForm = el(
    "form",
    { class: "resolve-form" },
    el("h3", {}, "Resolve conflict"),
    el("label", {}, "Element A ", selectA),
    el("label", {}, "Element B ", selectB),
    el("button", { type: "submit" }, "Resolve"),
    verdict,
  );
  resolveForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void withBusyRetry("resolve", async () => {
      const res = await ctx.api.resolveElements(m, selectA.value, selectB.value);
      verdict.replaceChildren();
      if (res.winner === null) {
        verdict.append(badge("operator decision required", "escalate"), ` ${res.rationale}`);
      } else {
        verdict.append(
          el("strong", {}, `winner: ${res.winner}`),
          ` — ${res.rationale}`,
        );
      }
      verdict.dataset.state = "done";
      markWinner(tableNode, res);
    });
  });
  root.append(resolveForm);
}
