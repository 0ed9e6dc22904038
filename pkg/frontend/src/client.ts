// Thin typed client over the engine HTTP API plus the SSE push channel.

import type {
  ActionRequest,
  EventBatchResponse,
  PageIngestResponse,
  SignalEventPayload,
  StateDiff,
  StateSnapshot,
} from "./types.js";

export interface EngineClientOptions {
  fetchImpl?: typeof fetch;
}

export class EngineError extends Error {
  constructor(public status: number, public errorName: string, message: string) {
    super(message);
  }
}

async function unwrap<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let name = "HttpError";
    let message = response.statusText;
    try {
      const body = (await response.json()) as { detail?: { error?: string; message?: string } };
      name = body.detail?.error ?? name;
      message = body.detail?.message ?? message;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new EngineError(response.status, name, message);
  }
  return (await response.json()) as T;
}

export class EngineClient {
  private fetchImpl: typeof fetch;

  constructor(public baseUrl: string, public sessionId: string, options: EngineClientOptions = {}) {
    this.fetchImpl = options.fetchImpl ?? fetch;
  }

  static async create(
    baseUrl: string,
    sessionId?: string,
    options: EngineClientOptions = {},
  ): Promise<EngineClient> {
    const fetchImpl = options.fetchImpl ?? fetch;
    const response = await fetchImpl(`${baseUrl}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ session_id: sessionId ?? null }),
    });
    const body = await unwrap<{ session_id: string }>(response);
    return new EngineClient(baseUrl, body.session_id, options);
  }

  private url(path: string): string {
    return `${this.baseUrl}/sessions/${this.sessionId}${path}`;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchImpl(this.url(path), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return unwrap<T>(response);
  }

  async ingestPage(payload: {
    url: string;
    html: string;
    captured_at: number;
    title?: string;
    page_id?: string;
    layout?: { block_index: number; scroll_offset: number }[];
  }): Promise<PageIngestResponse> {
    return this.post<PageIngestResponse>("/pages", payload);
  }

  async sendEvents(events: SignalEventPayload[]): Promise<EventBatchResponse> {
    return this.post<EventBatchResponse>("/events", { events });
  }

  async applyAction(action: ActionRequest): Promise<{ revision: number }> {
    return this.post<{ revision: number }>("/actions", {
      kind: action.kind,
      payload: action.payload,
      timestamp: action.timestamp ?? Date.now(),
    });
  }

  /** Build the action from fresh state and retry once when the first attempt
   * hits a stale reference (the target vanished in a newer revision). */
  async applyActionWithRetry(
    build: (state: StateSnapshot) => ActionRequest | null,
  ): Promise<{ revision: number } | null> {
    for (let attempt = 0; attempt < 2; attempt++) {
      const state = await this.getState();
      const action = build(state);
      if (action === null) return null;
      try {
        return await this.applyAction(action);
      } catch (error) {
        const stale = error instanceof EngineError && error.status === 404;
        if (!stale || attempt === 1) throw error;
      }
    }
    return null;
  }

  async getState(): Promise<StateSnapshot> {
    const response = await this.fetchImpl(this.url("/state"));
    return unwrap<StateSnapshot>(response);
  }

  async getDiff(since: number): Promise<StateDiff> {
    const response = await this.fetchImpl(this.url(`/state?since=${since}`));
    return unwrap<StateDiff>(response);
  }

  async export(format: "json" | "csv" | "md"): Promise<string> {
    const response = await this.fetchImpl(this.url(`/export?format=${format}`));
    if (!response.ok) throw new EngineError(response.status, "HttpError", response.statusText);
    return response.text();
  }

  /** Consume the SSE push channel; resolves when the stream ends or the
   * signal aborts. Each data frame is a StateDiff. */
  async subscribe(
    onDiff: (diff: StateDiff) => void,
    signal?: AbortSignal,
  ): Promise<void> {
    const response = await this.fetchImpl(this.url("/subscribe"), { signal });
    if (!response.ok || !response.body) {
      throw new EngineError(response.status, "HttpError", "subscribe failed");
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    try {
      while (true) {
        const { done, value } = await reader.read();
        if (done) break;
        buffer += decoder.decode(value, { stream: true });
        let boundary;
        while ((boundary = buffer.indexOf("\n\n")) !== -1) {
          const frame = buffer.slice(0, boundary);
          buffer = buffer.slice(boundary + 2);
          for (const line of frame.split("\n")) {
            if (line.startsWith("data:")) {
              onDiff(JSON.parse(line.slice(5)) as StateDiff);
            }
          }
        }
      }
    } finally {
      reader.releaseLock();
    }
  }
}

/** Parse a raw SSE chunk sequence into data frames (exposed for tests). */
export function parseSseFrames(chunks: string[]): unknown[] {
  const out: unknown[] = [];
  let buffer = "";
  for (const chunk of chunks) {
    buffer += chunk;
    let boundary;
    while ((boundary = buffer.indexOf("\n\n")) !== -1) {
      const frame = buffer.slice(0, boundary);
      buffer = buffer.slice(boundary + 2);
      for (const line of frame.split("\n")) {
        if (line.startsWith("data:")) out.push(JSON.parse(line.slice(5)));
      }
    }
  }
  return out;
}
