// Ranking form model: the participant places the four anonymized slots
// into a strict best-to-worst order. Submission stays blocked until every
// slot is placed exactly once; ties are impossible by construction.

import type { RankingMessage } from "./protocol.js";

export class IncompleteRankingError extends Error {}

export class RankingForm {
  readonly slots: readonly string[];
  comment = "";
  private order: string[] = [];

  constructor(slots: readonly string[]) {
    if (new Set(slots).size !== slots.length) {
      throw new Error("slots must be distinct");
    }
    this.slots = [...slots];
  }

  current(): readonly string[] {
    return [...this.order];
  }

  unplaced(): string[] {
    return this.slots.filter((s) => !this.order.includes(s));
  }

  // Appends the slot at the bottom of the current order. Returns false for
  // unknown slots and for slots already placed.
  pick(slot: string): boolean {
    if (!this.slots.includes(slot) || this.order.includes(slot)) return false;
    this.order.push(slot);
    return true;
  }

  remove(slot: string): boolean {
    const i = this.order.indexOf(slot);
    if (i < 0) return false;
    this.order.splice(i, 1);
    return true;
  }

  // Swaps the slot with its neighbor: delta -1 moves it up, +1 down.
  move(slot: string, delta: -1 | 1): boolean {
    const i = this.order.indexOf(slot);
    const j = i + delta;
    if (i < 0 || j < 0 || j >= this.order.length) return false;
    [this.order[i], this.order[j]] = [this.order[j], this.order[i]];
    return true;
  }

  isComplete(): boolean {
    return this.order.length === this.slots.length;
  }

  toMessage(): RankingMessage {
    if (!this.isComplete()) {
      throw new IncompleteRankingError(
        `order has ${this.order.length} of ${this.slots.length} slots`,
      );
    }
    const msg: RankingMessage = { type: "ranking", order: [...this.order] };
    if (this.comment !== "") msg.comment = this.comment;
    return msg;
  }
}
