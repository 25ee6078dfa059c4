// Game view-model: everything the page shows, derived from service
// responses only. DOM-free so it runs headless in tests.

import { ApiClient, ApiError } from "./api.js";
import { renderAction, validateBuilder, type BuilderState } from "./builder.js";
import type { ActionResponse, MetricsPayload, SessionPayload } from "./types.js";

export interface HistoryEntry {
  index: number;
  action: string;
  feedback: string;
  success: boolean;
  parseError: string | null;
}

export interface ViewState {
  session: SessionPayload;
  history: HistoryEntry[];
  metrics: MetricsPayload | null;
  hintBanner: string | null;
  inlineError: string | null;
  offline: boolean;
}

/** Stored session handle, so a reloaded tab can pick its game back up. */
export interface HandleStore {
  load(): string | null;
  save(handle: string | null): void;
}

export class MemoryHandleStore implements HandleStore {
  private handle: string | null = null;
  load(): string | null {
    return this.handle;
  }
  save(handle: string | null): void {
    this.handle = handle;
  }
}

export class BrowserHandleStore implements HandleStore {
  private static KEY = "escaperoom-session";
  load(): string | null {
    return window.localStorage.getItem(BrowserHandleStore.KEY);
  }
  save(handle: string | null): void {
    if (handle === null) {
      window.localStorage.removeItem(BrowserHandleStore.KEY);
    } else {
      window.localStorage.setItem(BrowserHandleStore.KEY, handle);
    }
  }
}

let counter = 0;

function freshKey(): string {
  counter += 1;
  const rand = Math.random().toString(36).slice(2, 10);
  return `ui-${Date.now()}-${counter}-${rand}`;
}

export class GameView {
  state: ViewState | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly store: HandleStore = new MemoryHandleStore(),
  ) {}

  private adopt(session: SessionPayload): ViewState {
    const previous = this.state;
    this.state = {
      session,
      history: previous && previous.session.session_id === session.session_id ? previous.history : [],
      metrics: previous && previous.session.session_id === session.session_id ? previous.metrics : null,
      hintBanner: session.hint,
      inlineError: null,
      offline: false,
    };
    return this.state;
  }

  async start(scenarioId: string, difficulty: string): Promise<ViewState> {
    try {
      const session = await this.api.createSession(scenarioId, difficulty);
      this.store.save(session.session_id);
      this.state = null;
      return this.adopt(session);
    } catch (error) {
      return this.fail(error);
    }
  }

  /** Restore a stored handle; idle sessions reload from the server's disk. */
  async reconnect(): Promise<ViewState | null> {
    const handle = this.store.load();
    if (!handle) {
      return null;
    }
    try {
      const session = await this.api.observation(handle);
      return this.adopt(session);
    } catch (error) {
      if (error instanceof ApiError && error.code === "unknown_session") {
        this.store.save(null);
        return null;
      }
      return this.fail(error);
    }
  }

  async submitRaw(text: string): Promise<ViewState> {
    const current = this.requireState();
    try {
      const response = await this.api.postAction(
        current.session.session_id,
        text,
        freshKey(),
      );
      return this.applyAction(text, response);
    } catch (error) {
      return this.fail(error);
    }
  }

  async submitBuilder(builder: BuilderState): Promise<ViewState> {
    const problem = validateBuilder(builder);
    if (problem) {
      const current = this.requireState();
      current.inlineError = problem;
      return current;
    }
    return this.submitRaw(renderAction(builder));
  }

  async requestHint(): Promise<ViewState> {
    const current = this.requireState();
    try {
      const response = await this.api.requestHint(current.session.session_id);
      current.hintBanner = response.hint;
      current.session.hint = response.hint;
      current.session.progress.hints_used = response.hints_used;
      current.inlineError = null;
      return current;
    } catch (error) {
      return this.fail(error);
    }
  }

  async refreshMetrics(): Promise<ViewState> {
    const current = this.requireState();
    current.metrics = await this.api.metrics(current.session.session_id);
    return current;
  }

  transcript(): Promise<string> {
    return this.api.transcript(this.requireState().session.session_id);
  }

  private applyAction(text: string, response: ActionResponse): ViewState {
    const current = this.requireState();
    current.history.push({
      index: response.progress.step_count,
      action: text,
      feedback: response.parse_error
        ? `${response.outcome.feedback}`
        : response.outcome.feedback,
      success: response.outcome.success,
      parseError: response.parse_error,
    });
    current.session = {
      session_id: response.session_id,
      scenario_id: response.scenario_id,
      difficulty: response.difficulty,
      role: response.role,
      finished: response.finished,
      progress: response.progress,
      hint: response.hint,
      observation: response.observation,
    };
    current.metrics = response.metrics;
    current.hintBanner = response.hint;
    current.inlineError = response.parse_error;
    if (response.finished) {
      this.store.save(null);
    }
    return current;
  }

  private requireState(): ViewState {
    if (!this.state) {
      throw new Error("no active session");
    }
    return this.state;
  }

  private fail(error: unknown): ViewState {
    const message =
      error instanceof ApiError
        ? `${error.code}: ${error.message}`
        : "service unreachable";
    if (this.state) {
      this.state.inlineError = message;
      this.state.offline = !(error instanceof ApiError);
      return this.state;
    }
    throw error instanceof Error ? error : new Error(message);
  }
}
