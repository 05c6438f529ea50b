// Keyboard layer: arrows move, space interacts, anything else is ignored.
// There is no stay key; the server plays a stay for every tick that brings
// no input, so "doing nothing" needs no message at all.

import type { Action } from "./protocol.js";
import { ACTION } from "./protocol.js";

export const KEY_TO_ACTION: Record<string, Action> = {
  ArrowUp: ACTION.up,
  ArrowDown: ACTION.down,
  ArrowLeft: ACTION.left,
  ArrowRight: ACTION.right,
  " ": ACTION.interact,
};

export function actionForKey(key: string): Action | null {
  return KEY_TO_ACTION[key] ?? null;
}
