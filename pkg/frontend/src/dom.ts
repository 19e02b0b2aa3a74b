// Tiny DOM builders; keeps the views free of innerHTML string assembly.

type Child = Node | string | null | undefined;

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) {
    if (child === null || child === undefined) continue;
    node.append(typeof child === "string" ? document.createTextNode(child) : child);
  }
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

export function option(value: string, label?: string): HTMLOptionElement {
  return el("option", { value }, label ?? value);
}

export function badge(text: string, kind: string): HTMLSpanElement {
  return el("span", { class: `badge badge-${kind}` }, text);
}

export function table(
  headers: string[],
  rows: (string | Node)[][],
  attrs: Record<string, string> = {},
): HTMLTableElement {
  const head = el("tr", {}, ...headers.map((h) => el("th", {}, h)));
  const body = rows.map((cells) =>
    el("tr", {}, ...cells.map((c) => el("td", {}, c))),
  );
  return el("table", attrs, el("thead", {}, head), el("tbody", {}, ...body));
}
