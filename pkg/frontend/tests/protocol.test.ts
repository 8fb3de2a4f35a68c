import { describe, expect, it } from "vitest";

import { parseServerFrame } from "../src/protocol.js";
import { loadFixture } from "./fixture.js";

const fx = loadFixture();

describe("parseServerFrame", () => {
  it("round-trips every recorded view frame", () => {
    for (const frame of fx.frames) {
      const parsed = parseServerFrame(JSON.stringify(frame));
      expect(parsed).toEqual(frame);
    }
  });

  it("decodes error frames", () => {
    const parsed = parseServerFrame(
      JSON.stringify({ type: "error", code: "bad_action", message: "nope" }),
    );
    expect(parsed).toEqual({
      type: "error",
      code: "bad_action",
      message: "nope",
    });
  });

  it("tolerates unknown extra fields", () => {
    const frame = { ...fx.frames[0], someday: "maybe" };
    const parsed = parseServerFrame(JSON.stringify(frame));
    expect(parsed).not.toBeNull();
    expect(parsed!.type).toBe("view");
  });

  it("rejects everything else", () => {
    const bad = [
      "not json",
      "[1, 2]",
      "42",
      '"view"',
      "{}",
      '{"type": "bogus"}',
      '{"type": "view"}',
      '{"type": "view", "session": 5, "step_index": 0, "done": false}',
      '{"type": "error", "code": "x"}',
    ];
    for (const raw of bad) expect(parseServerFrame(raw)).toBeNull();
  });
});
