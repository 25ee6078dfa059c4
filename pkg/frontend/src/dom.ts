// Imperative DOM layer. Renders the view-model and wires controls; every
// handler stores its in-flight promise on the app handle so scripted
// tests can await it.

import { ApiClient } from "./api.js";
import { slotsFor, VERBS, type BuilderState, type Verb } from "./builder.js";
import { GameView, MemoryHandleStore, type HandleStore } from "./session.js";
import { parseTranscript, ReplayStepper, TranscriptError } from "./replay.js";
import type { ObservationPayload } from "./types.js";

export interface App {
  view: GameView;
  pending: Promise<unknown>;
  stepper: ReplayStepper | null;
}

function el<T extends HTMLElement>(root: ParentNode, selector: string): T {
  const node = root.querySelector(selector);
  if (!node) {
    throw new Error(`missing element ${selector}`);
  }
  return node as T;
}

function option(value: string, label?: string): HTMLOptionElement {
  const node = document.createElement("option");
  node.value = value;
  node.textContent = label ?? value;
  return node;
}

export const PAGE_TEMPLATE = `
<header class="bar">
  <h1>escaperoom</h1>
  <nav>
    <button data-testid="tab-play" data-tab="play">Play</button>
    <button data-testid="tab-replay" data-tab="replay">Replay</button>
  </nav>
</header>

<section data-panel="play">
  <div class="setup" data-testid="setup">
    <select data-testid="scenario-select"></select>
    <select data-testid="difficulty-select"></select>
    <button data-testid="start-button">Start game</button>
    <button data-testid="resume-button" hidden>Resume previous game</button>
    <span class="error" data-testid="setup-error"></span>
  </div>

  <div class="game" data-testid="game" hidden>
    <div class="columns">
      <div class="main">
        <pre class="observation" data-testid="observation"></pre>
        <div class="hint-banner" data-testid="hint-banner" hidden></div>
        <div class="builder">
          <select data-testid="verb-select"></select>
          <select data-testid="arg-a-select"></select>
          <input data-testid="arg-a-text" hidden />
          <select data-testid="arg-b-select" hidden></select>
          <button data-testid="builder-submit">Do it</button>
        </div>
        <div class="raw">
          <input data-testid="raw-input" placeholder="or type any action, e.g. apply(key, safe)" />
          <button data-testid="raw-submit">Send</button>
        </div>
        <div class="error" data-testid="inline-error"></div>
        <ol class="history" data-testid="history"></ol>
      </div>
      <div class="side">
        <button data-testid="hint-button">Request a hint</button>
        <div class="progress" data-testid="progress"></div>
        <ul class="bag" data-testid="bag"></ul>
        <div class="metrics" data-testid="metrics"></div>
        <div class="finished" data-testid="finished" hidden></div>
      </div>
    </div>
  </div>
</section>

<section data-panel="replay" hidden>
  <textarea data-testid="replay-input" rows="6"
    placeholder="Paste a transcript (.jsonl) here"></textarea>
  <button data-testid="replay-load">Load transcript</button>
  <span class="error" data-testid="replay-error"></span>
  <div class="stepper" data-testid="stepper" hidden>
    <div class="controls">
      <button data-testid="replay-prev">&#8592; Prev</button>
      <span data-testid="replay-position"></span>
      <button data-testid="replay-next">Next &#8594;</button>
    </div>
    <div class="step-card" data-testid="step-card"></div>
    <div class="markers" data-testid="replay-markers"></div>
  </div>
</section>
`;

export function mountApp(
  root: HTMLElement,
  api: ApiClient,
  store: HandleStore = new MemoryHandleStore(),
): App {
  root.innerHTML = PAGE_TEMPLATE;
  const view = new GameView(api, store);
  const app: App = { view, pending: Promise.resolve(), stepper: null };

  const scenarioSelect = el<HTMLSelectElement>(root, '[data-testid="scenario-select"]');
  const difficultySelect = el<HTMLSelectElement>(root, '[data-testid="difficulty-select"]');
  const verbSelect = el<HTMLSelectElement>(root, '[data-testid="verb-select"]');
  const argASelect = el<HTMLSelectElement>(root, '[data-testid="arg-a-select"]');
  const argAText = el<HTMLInputElement>(root, '[data-testid="arg-a-text"]');
  const argBSelect = el<HTMLSelectElement>(root, '[data-testid="arg-b-select"]');
  const rawInput = el<HTMLInputElement>(root, '[data-testid="raw-input"]');

  for (const verb of VERBS) {
    verbSelect.append(option(verb));
  }

  function currentObservation(): ObservationPayload | null {
    return view.state?.session.observation ?? null;
  }

  function builderState(): BuilderState {
    const verb = verbSelect.value as Verb;
    const slots = currentObservation() ? slotsFor(verb, currentObservation()!) : null;
    const argA = slots && slots.first.kind === "text" ? argAText.value : argASelect.value;
    return { verb, argA, argB: argBSelect.value };
  }

  function renderBuilder(): void {
    const observation = currentObservation();
    if (!observation) {
      return;
    }
    const slots = slotsFor(verbSelect.value as Verb, observation);
    if (slots.first.kind === "choices") {
      argASelect.hidden = false;
      argAText.hidden = true;
      argASelect.innerHTML = "";
      for (const choice of slots.first.options) {
        argASelect.append(option(choice));
      }
    } else {
      argASelect.hidden = true;
      argAText.hidden = false;
    }
    if (slots.second.kind === "choices") {
      argBSelect.hidden = false;
      argBSelect.innerHTML = "";
      for (const choice of slots.second.options) {
        argBSelect.append(option(choice));
      }
    } else {
      argBSelect.hidden = true;
    }
  }

  function render(): void {
    const state = view.state;
    if (!state) {
      return;
    }
    el<HTMLElement>(root, '[data-testid="setup"]').hidden = true;
    el<HTMLElement>(root, '[data-testid="game"]').hidden = false;

    const observationPane = el<HTMLElement>(root, '[data-testid="observation"]');
    observationPane.textContent =
      state.session.observation?.text ?? "The game is over.";

    const hintBanner = el<HTMLElement>(root, '[data-testid="hint-banner"]');
    hintBanner.hidden = !state.hintBanner;
    hintBanner.textContent = state.hintBanner ?? "";

    const progress = state.session.progress;
    el<HTMLElement>(root, '[data-testid="progress"]').textContent =
      `Key steps ${progress.completed_key_steps.length}/${progress.total_key_steps}` +
      ` · Tools ${progress.collected_tools}/${progress.total_tools}` +
      ` · Steps ${progress.step_count} · Hints ${progress.hints_used}`;

    const bagList = el<HTMLElement>(root, '[data-testid="bag"]');
    bagList.innerHTML = "";
    for (const entry of state.session.observation?.bag ?? []) {
      const item = document.createElement("li");
      item.textContent = `${entry.name}: ${entry.desc}`;
      bagList.append(item);
    }

    const history = el<HTMLElement>(root, '[data-testid="history"]');
    history.innerHTML = "";
    for (const entry of state.history) {
      const item = document.createElement("li");
      item.className = entry.success ? "ok" : "failed";
      item.textContent = `${entry.action} — ${entry.feedback}`;
      history.append(item);
    }

    el<HTMLElement>(root, '[data-testid="inline-error"]').textContent =
      state.inlineError ?? "";

    const metricsPane = el<HTMLElement>(root, '[data-testid="metrics"]');
    if (state.metrics) {
      metricsPane.textContent =
        `hints ${state.metrics.hints_used} · steps ${state.metrics.total_steps}` +
        ` · early exit ${state.metrics.early_exit_progress.toFixed(1)}%`;
    }

    const finished = el<HTMLElement>(root, '[data-testid="finished"]');
    finished.hidden = !state.session.finished;
    if (state.session.finished) {
      finished.textContent = "Escaped! Final metrics above.";
    }
    renderBuilder();
  }

  function track<T>(work: Promise<T>): Promise<T> {
    app.pending = work.then(render, (error) => {
      const setupError = el<HTMLElement>(root, '[data-testid="setup-error"]');
      setupError.textContent = error instanceof Error ? error.message : "service unreachable";
    });
    return work;
  }

  // -- setup ---------------------------------------------------------------

  track(
    (async () => {
      const scenarios = await api.scenarios();
      for (const entry of scenarios) {
        scenarioSelect.append(
          option(entry.id, `${entry.name} (${entry.key_steps} key steps)`),
        );
      }
      const first = scenarios[0];
      for (const level of first ? first.difficulties : []) {
        difficultySelect.append(option(level));
      }
      if (store.load()) {
        el<HTMLElement>(root, '[data-testid="resume-button"]').hidden = false;
      }
    })(),
  );

  el<HTMLElement>(root, '[data-testid="start-button"]').addEventListener("click", () => {
    track(view.start(scenarioSelect.value, difficultySelect.value));
  });
  el<HTMLElement>(root, '[data-testid="resume-button"]').addEventListener("click", () => {
    track(view.reconnect());
  });

  // -- acting --------------------------------------------------------------

  verbSelect.addEventListener("change", renderBuilder);
  el<HTMLElement>(root, '[data-testid="builder-submit"]').addEventListener("click", () => {
    track(view.submitBuilder(builderState()));
  });
  el<HTMLElement>(root, '[data-testid="raw-submit"]').addEventListener("click", () => {
    const text = rawInput.value;
    rawInput.value = "";
    track(view.submitRaw(text));
  });
  el<HTMLElement>(root, '[data-testid="hint-button"]').addEventListener("click", () => {
    track(view.requestHint());
  });

  // -- tabs ----------------------------------------------------------------

  for (const button of Array.from(root.querySelectorAll<HTMLElement>("[data-tab]"))) {
    button.addEventListener("click", () => {
      const tab = button.dataset.tab;
      for (const panel of Array.from(root.querySelectorAll<HTMLElement>("[data-panel]"))) {
        panel.hidden = panel.dataset.panel !== tab;
      }
    });
  }

  // -- replay --------------------------------------------------------------

  const stepCard = el<HTMLElement>(root, '[data-testid="step-card"]');
  const replayError = el<HTMLElement>(root, '[data-testid="replay-error"]');

  function renderStep(): void {
    if (!app.stepper) {
      return;
    }
    const stepper = app.stepper;
    const step = stepper.current();
    el<HTMLElement>(root, '[data-testid="replay-position"]').textContent =
      `step ${step.index} / ${stepper.length}`;
    const badges: string[] = [];
    if (step.hint_issued) {
      badges.push("HINT ISSUED");
    } else if (step.hint_active) {
      badges.push("hint active");
    }
    if (step.task_delta) {
      badges.push(`task ${String(step.task_delta["op"])}`);
    }
    if (step.progress.kind !== "none") {
      badges.push(`progress: ${step.progress.kind} ${step.progress.target ?? ""}`);
    }
    stepCard.innerHTML = "";
    const lines = [
      `scene: ${step.scene}`,
      `action: ${step.action ?? step.action_raw}`,
      `${step.success ? "success" : "failed"} — ${step.feedback}`,
    ];
    for (const text of lines) {
      const row = document.createElement("div");
      row.textContent = text;
      stepCard.append(row);
    }
    for (const badge of badges) {
      const tag = document.createElement("span");
      tag.className = "badge";
      tag.dataset.badge = badge;
      tag.textContent = badge;
      stepCard.append(tag);
    }
    const hint = stepper.hintAfterCurrent();
    if (hint) {
      const block = document.createElement("pre");
      block.className = "hint-text";
      block.textContent = hint.text;
      stepCard.append(block);
    }
    el<HTMLElement>(root, '[data-testid="replay-markers"]').textContent =
      `hints after steps: [${stepper.hintMarkers().join(", ")}] · ` +
      `task-list changes at: [${stepper.taskDeltaMarkers().join(", ")}]`;
  }

  el<HTMLElement>(root, '[data-testid="replay-load"]').addEventListener("click", () => {
    const text = el<HTMLTextAreaElement>(root, '[data-testid="replay-input"]').value;
    try {
      app.stepper = new ReplayStepper(parseTranscript(text));
      replayError.textContent = "";
      el<HTMLElement>(root, '[data-testid="stepper"]').hidden = false;
      renderStep();
    } catch (error) {
      app.stepper = null;
      el<HTMLElement>(root, '[data-testid="stepper"]').hidden = true;
      replayError.textContent =
        error instanceof TranscriptError ? `malformed transcript: ${error.message}` : String(error);
    }
  });
  el<HTMLElement>(root, '[data-testid="replay-next"]').addEventListener("click", () => {
    app.stepper?.next();
    renderStep();
  });
  el<HTMLElement>(root, '[data-testid="replay-prev"]').addEventListener("click", () => {
    app.stepper?.prev();
    renderStep();
  });

  return app;
}
