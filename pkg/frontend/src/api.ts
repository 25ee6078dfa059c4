import type {
  ActionResponse,
  HintResponse,
  MetricsPayload,
  ScenarioInfo,
  SessionPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let code = "http_error";
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = await response.json();
    if (body && body.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(response.status, code, message);
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  async scenarios(): Promise<ScenarioInfo[]> {
    const body = await this.request<{ scenarios: ScenarioInfo[] }>("/scenarios");
    return body.scenarios;
  }

  createSession(scenarioId: string, difficulty: string): Promise<SessionPayload> {
    return this.request<SessionPayload>("/sessions", {
      method: "POST",
      body: JSON.stringify({
        scenario_id: scenarioId,
        difficulty,
        role: "human",
      }),
    });
  }

  observation(sessionId: string): Promise<SessionPayload> {
    return this.request<SessionPayload>(`/sessions/${sessionId}/observation`);
  }

  postAction(sessionId: string, text: string, idempotencyKey: string): Promise<ActionResponse> {
    return this.request<ActionResponse>(`/sessions/${sessionId}/actions`, {
      method: "POST",
      body: JSON.stringify({ text, idempotency_key: idempotencyKey }),
    });
  }

  requestHint(sessionId: string): Promise<HintResponse> {
    return this.request<HintResponse>(`/sessions/${sessionId}/hint`, { method: "POST" });
  }

  metrics(sessionId: string): Promise<MetricsPayload> {
    return this.request<MetricsPayload>(`/sessions/${sessionId}/metrics`);
  }

  async transcript(sessionId: string): Promise<string> {
    const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/transcript`);
    if (!response.ok) {
      throw await parseError(response);
    }
    return response.text();
  }
}
