import { describe, expect, it } from "vitest";
import { IncompleteRankingError, RankingForm } from "../src/ranking.js";

const SLOTS = ["A", "B", "C", "D"];

describe("ranking form", () => {
  it("stays blocked until every slot is placed", () => {
    const form = new RankingForm(SLOTS);
    expect(form.isComplete()).toBe(false);
    expect(() => form.toMessage()).toThrow(IncompleteRankingError);
    form.pick("B");
    form.pick("D");
    form.pick("A");
    expect(form.isComplete()).toBe(false);
    expect(() => form.toMessage()).toThrow(IncompleteRankingError);
    form.pick("C");
    expect(form.isComplete()).toBe(true);
    expect(form.toMessage()).toEqual({
      type: "ranking",
      order: ["B", "D", "A", "C"],
    });
  });

  it("rejects duplicates and unknown slots", () => {
    const form = new RankingForm(SLOTS);
    expect(form.pick("A")).toBe(true);
    expect(form.pick("A")).toBe(false);
    expect(form.pick("E")).toBe(false);
    expect(form.current()).toEqual(["A"]);
    expect(form.unplaced()).toEqual(["B", "C", "D"]);
  });

  it("reorders with neighbor swaps and supports removal", () => {
    const form = new RankingForm(SLOTS);
    for (const s of SLOTS) form.pick(s);
    expect(form.move("D", -1)).toBe(true);
    expect(form.current()).toEqual(["A", "B", "D", "C"]);
    expect(form.move("A", 1)).toBe(true);
    expect(form.current()).toEqual(["B", "A", "D", "C"]);
    expect(form.move("B", -1)).toBe(false); // already first
    expect(form.move("C", 1)).toBe(false); // already last
    form.remove("D");
    expect(form.current()).toEqual(["B", "A", "C"]);
    expect(form.unplaced()).toEqual(["D"]);
    expect(form.isComplete()).toBe(false);
  });

  it("carries the comment through verbatim", () => {
    const form = new RankingForm(SLOTS);
    for (const s of ["D", "C", "B", "A"]) form.pick(s);
    const note = `  partner C kept blocking ${String.fromCodePoint(0x1f372)}  `;
    form.comment = note;
    expect(form.toMessage()).toEqual({
      type: "ranking",
      order: ["D", "C", "B", "A"],
      comment: note,
    });
  });

  it("omits the comment field when the box is empty", () => {
    const form = new RankingForm(SLOTS);
    for (const s of SLOTS) form.pick(s);
    expect(form.toMessage()).not.toHaveProperty("comment");
  });
});
