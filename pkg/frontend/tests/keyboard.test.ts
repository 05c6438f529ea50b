import { describe, expect, it } from "vitest";
import { ACTION } from "../src/protocol.js";
import { KEY_TO_ACTION, actionForKey } from "../src/keyboard.js";

describe("key bindings", () => {
  it("maps each movement key to exactly one action", () => {
    expect(actionForKey("ArrowUp")).toBe(ACTION.up);
    expect(actionForKey("ArrowDown")).toBe(ACTION.down);
    expect(actionForKey("ArrowLeft")).toBe(ACTION.left);
    expect(actionForKey("ArrowRight")).toBe(ACTION.right);
    expect(actionForKey(" ")).toBe(ACTION.interact);
  });

  it("ignores every other key", () => {
    for (const key of ["a", "Enter", "Escape", "Tab", "w", "s", "5", "Spacebar"]) {
      expect(actionForKey(key)).toBeNull();
    }
  });

  it("binds five keys and never the stay action", () => {
    const bound = Object.values(KEY_TO_ACTION);
    expect(bound).toHaveLength(5);
    expect(new Set(bound).size).toBe(5);
    expect(bound).not.toContain(ACTION.stay);
  });
});
