// Verb builder: constrains arity and argument sources so humans make
// fewer typos. It validates FORM only; whether an action works is always
// the server's call.

import type { ObservationPayload } from "./types.js";

export const VERBS = ["move", "click", "apply", "input", "craft"] as const;
export type Verb = (typeof VERBS)[number];

export interface BuilderState {
  verb: Verb;
  argA: string;
  argB: string;
}

export type ArgSource =
  | { kind: "choices"; label: string; options: string[] }
  | { kind: "text"; label: string }
  | { kind: "none" };

export interface BuilderSlots {
  first: ArgSource;
  second: ArgSource;
}

/** Where each argument may come from, given the current observation. */
export function slotsFor(verb: Verb, observation: ObservationPayload): BuilderSlots {
  const items = observation.interactable_items;
  const bag = observation.bag.map((entry) => entry.name);
  switch (verb) {
    case "move":
      return {
        first: {
          kind: "choices",
          label: "nearby scene",
          options: observation.nearby_scenes.map((scene) => scene.label),
        },
        second: { kind: "none" },
      };
    case "click":
      return {
        first: { kind: "choices", label: "interactable item", options: items },
        second: { kind: "none" },
      };
    case "apply":
      return {
        first: { kind: "choices", label: "tool from bag", options: bag },
        // A tool can also act on another tool in the bag (upgrades).
        second: { kind: "choices", label: "target", options: [...items, ...bag] },
      };
    case "input":
      return {
        first: { kind: "text", label: "string (only digits and letters)" },
        second: { kind: "choices", label: "interactable item", options: items },
      };
    case "craft":
      return {
        first: { kind: "choices", label: "tool from bag", options: bag },
        second: { kind: "choices", label: "tool from bag", options: bag },
      };
  }
}

/** Client-side form validation; null means submittable. */
export function validateBuilder(state: BuilderState): string | null {
  if (!state.argA.trim()) {
    return "choose the first argument";
  }
  const needsSecond = state.verb === "apply" || state.verb === "input" || state.verb === "craft";
  if (needsSecond && !state.argB.trim()) {
    return "choose the second argument";
  }
  if (state.verb === "input" && !/^[0-9a-zA-Z]+$/.test(state.argA.trim())) {
    return "only digits and letters";
  }
  if (state.verb === "craft" && state.argA.trim() === state.argB.trim()) {
    return "pick two different tools";
  }
  return null;
}

export function renderAction(state: BuilderState): string {
  const needsSecond = state.verb === "apply" || state.verb === "input" || state.verb === "craft";
  if (needsSecond) {
    return `${state.verb}(${state.argA.trim()}, ${state.argB.trim()})`;
  }
  return `${state.verb}(${state.argA.trim()})`;
}
