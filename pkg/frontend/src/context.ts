import type { Client } from "./api.js";

// Handed to every view; navigation goes through the hash router and
// refresh re-renders the current route after a mutation.
export interface Ctx {
  api: Client;
  navigate(path: string): Promise<void>;
  refresh(): Promise<void>;
}
