/** Typed client for the annotation service.
 *
 * All reads go through GET /round, /tasks, /metrics, /classes; the only
 * mutations are POST /labels and POST /round/advance. Non-2xx responses
 * surface as ApiError with the decoded body (e.g. committed_class on 409).
 */

import type {
  AdvanceResult,
  ClassOption,
  RoundInfo,
  RoundRecord,
  SubmitAck,
  Task,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: Record<string, unknown>,
  ) {
    super(`service returned ${status}: ${JSON.stringify(body)}`);
    this.name = "ApiError";
  }
}

export interface ClientOptions {
  token?: string;
  /** Injectable for tests; defaults to the global fetch. */
  fetchFn?: FetchLike;
  annotatorId?: string;
}

export class ServiceClient {
  private readonly baseUrl: string;
  private readonly token?: string;
  private readonly fetchFn: FetchLike;
  readonly annotatorId: string;

  constructor(baseUrl: string, options: ClientOptions = {}) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.token = options.token;
    this.fetchFn = options.fetchFn ?? ((input, init) => fetch(input, init));
    this.annotatorId = options.annotatorId ?? "console";
  }

  private headers(): Record<string, string> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    return headers;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const decoded = (await response.json().catch(() => ({}))) as Record<string, unknown>;
    if (!response.ok) throw new ApiError(response.status, decoded);
    return decoded as T;
  }

  getRound(): Promise<RoundInfo> {
    return this.request<RoundInfo>("GET", "/round");
  }

  async getTasks(limit?: number): Promise<Task[]> {
    const query = limit === undefined ? "" : `?limit=${limit}`;
    const body = await this.request<{ tasks: Task[] }>("GET", `/tasks${query}`);
    return body.tasks;
  }

  async getClasses(): Promise<ClassOption[]> {
    const body = await this.request<{ classes: ClassOption[] }>("GET", "/classes");
    return body.classes;
  }

  async getMetrics(): Promise<RoundRecord[]> {
    const body = await this.request<{ records: RoundRecord[] }>("GET", "/metrics");
    return body.records;
  }

  submitLabel(sampleIndex: number, classId: number): Promise<SubmitAck> {
    return this.request<SubmitAck>("POST", "/labels", {
      index: sampleIndex,
      class: classId,
      annotator_id: this.annotatorId,
    });
  }

  advanceRound(): Promise<AdvanceResult> {
    return this.request<AdvanceResult>("POST", "/round/advance");
  }
}
