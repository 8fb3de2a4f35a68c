/** Wire types for the session service.
 *
 * One JSON message per WebSocket frame. The server commits the agent's
 * meta-action before our decision is sent and reveals the proposed action
 * only in the post-resolution record, and only for ask steps. Extra fields
 * on known message types are ignored on both sides.
 */

export type Cell = [number, number]; // (x, y), y increasing downward

export type MetaAction = "play" | "ask";
export type HumanAction = "trust" | "oversee";

export interface GridOverlay {
  width: number;
  height: number;
  walls: Cell[];
  taboo: Cell[];
  start: Cell;
  goal: Cell;
}

/** Post-resolution record of the step that just ran. */
export interface ResolvedStep {
  state: Cell | number | null;
  si_meta_action: MetaAction;
  h_action: HumanAction;
  proposed_env_action: string | null; // non-null only when the agent asked
  executed: string;
  r_si: number;
  r_h: number;
  violation: boolean;
}

export interface ViewFrame {
  type: "view";
  session: string;
  step_index: number;
  state: Cell | number | null;
  si_meta_action: MetaAction | null; // null once the session is done
  proposed_env_action: null; // never revealed pre-decision
  executed: null;
  done: boolean;
  done_reason: string | null;
  cumulative: { r_si: number; r_h: number; violations: number };
  overlay: GridOverlay | null;
  resolved: ResolvedStep | null;
}

export interface ErrorFrame {
  type: "error";
  code: string;
  message: string;
}

export type ServerFrame = ViewFrame | ErrorFrame;

export interface OpenMessage {
  type: "open";
  seed: number;
}

export interface DecisionMessage {
  type: "h_action";
  session: string;
  action: HumanAction;
}

export interface CloseMessage {
  type: "close";
  session: string;
}

export type ClientMessage = OpenMessage | DecisionMessage | CloseMessage;

function isRecord(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

/** Decode one server frame; null for anything this console cannot use. */
export function parseServerFrame(raw: string): ServerFrame | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (!isRecord(data)) return null;
  if (data.type === "error") {
    if (typeof data.code !== "string" || typeof data.message !== "string")
      return null;
    return { type: "error", code: data.code, message: data.message };
  }
  if (data.type !== "view") return null;
  if (typeof data.session !== "string") return null;
  if (typeof data.step_index !== "number") return null;
  if (typeof data.done !== "boolean") return null;
  if (!isRecord(data.cumulative)) return null;
  return data as unknown as ViewFrame;
}
