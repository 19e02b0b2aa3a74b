// Toast stack. Busy rejections (HTTP 423) become retryable toasts so the
// operator can re-issue the mutation once the pipeline lock frees up.

import { ApiError } from "./api.js";
import { el } from "./dom.js";

function stack(): HTMLElement {
  let node = document.getElementById("toasts");
  if (!node) {
    node = el("div", { id: "toasts" });
    document.body.append(node);
  }
  return node;
}

export function toast(message: string, kind: "info" | "error" = "info"): void {
  const note = el("div", { class: `toast toast-${kind}`, role: "status" }, message);
  stack().append(note);
  setTimeout(() => note.remove(), 6000);
}

export function retryableToast(message: string, retry: () => void): void {
  const button = el("button", { class: "toast-retry", type: "button" }, "Retry");
  const note = el(
    "div",
    { class: "toast toast-busy", role: "alert" },
    el("span", {}, message),
    button,
  );
  button.addEventListener("click", () => {
    note.remove();
    retry();
  });
  stack().append(note);
}

// Runs a mutation; a busy signal surfaces as a retryable toast, anything
// else as an error toast. Returns true when the action went through.
export async function withBusyRetry(
  label: string,
  action: () => Promise<void>,
): Promise<boolean> {
  try {
    await action();
    return true;
  } catch (err) {
    if (err instanceof ApiError && err.busy) {
      retryableToast(`${label}: ${err.message}`, () => {
        void withBusyRetry(label, action);
      });
    } else if (err instanceof ApiError) {
      toast(`${err.code}: ${err.message}`, "error");
    } else {
      toast(String(err), "error");
    }
    return false;
  }
}
