/** Console state and its pure transitions.
 *
 * Everything the page shows lives in the ViewModel; rendering is a pure
 * function of it. The invariants the transitions maintain:
 *
 *   - decisionPending is true exactly when the session is live, a
 *     meta-action is committed, and no decision is already in flight.
 *   - transcript row k describes server step k, so the transcript length
 *     always equals the server's step index.
 *   - after an error (server frame or dropped connection) the model stays
 *     in the error phase until a fresh connect resets it; stray frames
 *     cannot re-enable the controls.
 */

import {
  Cell,
  ErrorFrame,
  GridOverlay,
  HumanAction,
  MetaAction,
  ResolvedStep,
  ServerFrame,
  ViewFrame,
} from "./protocol.js";

export type Phase = "idle" | "connecting" | "live" | "done" | "error";

export interface ErrorState {
  kind: "connection" | "server" | "protocol";
  code: string | null;
  message: string;
}

export interface TranscriptRow {
  step: number;
  si: MetaAction;
  h: HumanAction;
  proposed: string | null;
  executed: string;
  rSi: number;
  rH: number;
  violation: boolean;
}

export interface ViewModel {
  phase: Phase;
  endpoint: string | null;
  seed: number | null;
  session: string | null;
  overlay: GridOverlay | null;
  state: Cell | number | null;
  stepIndex: number;
  committedMeta: MetaAction | null;
  awaitingReply: boolean;
  decisionPending: boolean;
  cumulative: { rSi: number; rH: number; violations: number };
  doneReason: string | null;
  lastResolved: ResolvedStep | null;
  transcript: TranscriptRow[];
  error: ErrorState | null;
}

export function initialViewModel(): ViewModel {
  return {
    phase: "idle",
    endpoint: null,
    seed: null,
    session: null,
    overlay: null,
    state: null,
    stepIndex: 0,
    committedMeta: null,
    awaitingReply: false,
    decisionPending: false,
    cumulative: { rSi: 0, rH: 0, violations: 0 },
    doneReason: null,
    lastResolved: null,
    transcript: [],
    error: null,
  };
}

/** Fresh model for a new connection attempt; only endpoint/seed carry over. */
export function connectRequested(
  endpoint: string,
  seed: number,
): ViewModel {
  return { ...initialViewModel(), phase: "connecting", endpoint, seed };
}

function failed(vm: ViewModel, error: ErrorState): ViewModel {
  return {
    ...vm,
    phase: "error",
    decisionPending: false,
    awaitingReply: false,
    error,
  };
}

export function connectionFailed(vm: ViewModel, message: string): ViewModel {
  return failed(vm, { kind: "connection", code: null, message });
}

/** A frame arrived that is not part of the protocol. */
export function protocolError(vm: ViewModel, message: string): ViewModel {
  return failed(vm, { kind: "protocol", code: null, message });
}

/** Mark the decision as sent; controls stay off until the reply lands. */
export function decisionSent(vm: ViewModel): ViewModel {
  if (!vm.decisionPending) return vm;
  return { ...vm, awaitingReply: true, decisionPending: false };
}

function applyView(vm: ViewModel, frame: ViewFrame): ViewModel {
  // Single session per tab: frames for anything else are not ours.
  if (vm.session !== null && frame.session !== vm.session) return vm;

  let transcript = vm.transcript;
  if (frame.resolved !== null) {
    if (frame.step_index !== vm.transcript.length + 1) {
      return protocolError(
        vm,
        `step ${frame.step_index} does not extend a transcript of ` +
          `${vm.transcript.length} rows`,
      );
    }
    const r = frame.resolved;
    transcript = [
      ...vm.transcript,
      {
        step: frame.step_index - 1,
        si: r.si_meta_action,
        h: r.h_action,
        proposed: r.proposed_env_action,
        executed: r.executed,
        rSi: r.r_si,
        rH: r.r_h,
        violation: r.violation,
      },
    ];
  } else if (frame.step_index !== vm.transcript.length) {
    return protocolError(
      vm,
      `frame at step ${frame.step_index} carries no step record`,
    );
  }

  return {
    ...vm,
    phase: frame.done ? "done" : "live",
    session: frame.session,
    overlay: frame.overlay ?? vm.overlay,
    state: frame.state,
    stepIndex: frame.step_index,
    committedMeta: frame.si_meta_action,
    awaitingReply: false,
    decisionPending: !frame.done && frame.si_meta_action !== null,
    cumulative: {
      rSi: frame.cumulative.r_si,
      rH: frame.cumulative.r_h,
      violations: frame.cumulative.violations,
    },
    doneReason: frame.done_reason,
    lastResolved: frame.resolved,
    transcript,
    error: null,
  };
}

function applyError(vm: ViewModel, frame: ErrorFrame): ViewModel {
  return failed(vm, {
    kind: "server",
    code: frame.code,
    message: frame.message,
  });
}

/** Fold one server frame into the model. Frames after an error are dropped. */
export function applyFrame(vm: ViewModel, frame: ServerFrame): ViewModel {
  if (vm.phase === "error") return vm;
  return frame.type === "view" ? applyView(vm, frame) : applyError(vm, frame);
}
