/** Loader for the recorded session shared with the backend test suite.
 *
 * The file holds every frame the server sent during one scripted episode
 * plus the decisions that produced them, so the console can be driven
 * against real traffic without a live server.
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { HumanAction, ViewFrame } from "../src/protocol.js";
import { applyFrame, decisionSent, ViewModel } from "../src/viewmodel.js";

const here = dirname(fileURLToPath(import.meta.url));

export const FIXTURE_PATH = join(
  here,
  "..",
  "..",
  "tests",
  "data",
  "session_transcript.json",
);

export interface FixtureRow {
  step: number;
  si: string;
  h: string;
  proposed: string | null;
  executed: string;
  r_si: number;
  r_h: number;
  violation: boolean;
}

export interface Fixture {
  open: { type: "open"; seed: number };
  h_actions: HumanAction[];
  frames: ViewFrame[];
  transcript: FixtureRow[];
  final: { done_reason: string; steps: number; violations: number };
}

export function loadFixture(): Fixture {
  return JSON.parse(readFileSync(FIXTURE_PATH, "utf8")) as Fixture;
}

/** Fold the whole episode the way the client does: frame, decision, frame.
 *
 * Returns the model after every server frame, in order.
 */
export function playThrough(fx: Fixture, start: ViewModel): ViewModel[] {
  const out: ViewModel[] = [];
  let vm = start;
  fx.frames.forEach((frame, i) => {
    vm = applyFrame(vm, frame);
    out.push(vm);
    if (i < fx.h_actions.length) vm = decisionSent(vm);
  });
  return out;
}
