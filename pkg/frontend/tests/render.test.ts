import { describe, expect, it } from "vitest";

import { render } from "../src/render.js";
import {
  applyFrame,
  connectRequested,
  connectionFailed,
  initialViewModel,
  ViewModel,
} from "../src/viewmodel.js";
import { loadFixture, playThrough } from "./fixture.js";

const fx = loadFixture();
const states = playThrough(fx, connectRequested("ws://test", fx.open.seed));

function count(html: string, re: RegExp): number {
  return (html.match(re) ?? []).length;
}

describe("snapshots", () => {
  it("idle page", () => {
    expect(render(initialViewModel())).toMatchSnapshot();
  });

  it("first frame, decision pending on an ask", () => {
    expect(render(states[0]!)).toMatchSnapshot();
  });

  it("after an oversee that substituted the proposal", () => {
    // step 0 resolved: agent asked "down" into taboo, oversight moved "up"
    expect(render(states[1]!)).toMatchSnapshot();
  });

  it("finished episode", () => {
    expect(render(states[states.length - 1]!)).toMatchSnapshot();
  });

  it("server error banner", () => {
    const vm = applyFrame(states[2]!, {
      type: "error",
      code: "bad_action",
      message: "unknown h action",
    });
    expect(render(vm)).toMatchSnapshot();
  });

  it("connection failure with retry affordance", () => {
    const vm = connectionFailed(
      connectRequested("ws://test", 0),
      "connection lost",
    );
    expect(render(vm)).toMatchSnapshot();
  });
});

describe("rendering is a pure function of the model", () => {
  it("same model, same markup", () => {
    const vm = states[4]!;
    expect(render(vm)).toBe(render(vm));
    expect(render(structuredClone(vm))).toBe(render(vm));
  });
});

describe("grid", () => {
  it("always shows every taboo cell", () => {
    const want = fx.frames[0]!.overlay!.taboo.length;
    for (const vm of states) {
      expect(count(render(vm), /class="cell taboo[" ]/g)).toBe(want);
    }
  });

  it("shows exactly one agent marker while on the grid", () => {
    for (const vm of states) {
      const n = Array.isArray(vm.state) ? 1 : 0;
      expect(count(render(vm), />@</g)).toBe(n);
    }
  });

  it("keeps the taboo marking under the agent", () => {
    const vm: ViewModel = { ...states[0]!, state: [0, 1] };
    const html = render(vm);
    expect(html).toContain('class="cell taboo agent"');
    expect(count(html, />@</g)).toBe(1);
  });
});

describe("controls", () => {
  it("are enabled exactly when a decision is pending", () => {
    for (const vm of states) {
      const html = render(vm);
      const disabled = html.includes('data-action="trust" disabled');
      expect(disabled).toBe(!vm.decisionPending);
      expect(html.includes('data-action="oversee" disabled')).toBe(
        !vm.decisionPending,
      );
    }
  });

  it("stay disabled after a server error, and the banner shows", () => {
    const vm = applyFrame(states[2]!, {
      type: "error",
      code: "session_done",
      message: "session ended (goal)",
    });
    const html = render(vm);
    expect(html).toContain('data-action="trust" disabled');
    expect(html).toContain('data-action="oversee" disabled');
    expect(html).toContain("session_done");
    expect(html).toContain('data-action="retry"');
  });

  it("marks substituted actions in the step report", () => {
    expect(render(states[1]!)).toContain("(substituted)");
    // a trusted play step executes the proposal, nothing to flag
    expect(render(states[5]!)).not.toContain("(substituted)");
  });
});
