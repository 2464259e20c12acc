import { describe, expect, it, vi } from "vitest";

import { ApiError, ServiceClient } from "../src/api.js";

function fakeResponse(status: number, body: unknown): Response {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: () => Promise.resolve(body),
  } as Response;
}

describe("ServiceClient", () => {
  it("composes URLs and strips trailing slashes", async () => {
    const fetchFn = vi.fn().mockResolvedValue(
      fakeResponse(200, { schema_version: 1, tasks: [] }),
    );
    const client = new ServiceClient("http://svc:1234///", { fetchFn });
    await client.getTasks(7);
    expect(fetchFn).toHaveBeenCalledWith(
      "http://svc:1234/tasks?limit=7",
      expect.objectContaining({ method: "GET" }),
    );
  });

  it("sends the bearer token on every request", async () => {
    const fetchFn = vi.fn().mockResolvedValue(fakeResponse(200, { records: [] }));
    const client = new ServiceClient("http://svc", { fetchFn, token: "hush" });
    await client.getMetrics();
    const init = fetchFn.mock.calls[0][1] as RequestInit;
    expect((init.headers as Record<string, string>)["Authorization"]).toBe("Bearer hush");
  });

  it("posts label submissions with the annotator id", async () => {
    const fetchFn = vi.fn().mockResolvedValue(
      fakeResponse(200, {
        schema_version: 1, accepted: true, duplicate: false,
        sample_index: 5, class: 2, pending: 9,
      }),
    );
    const client = new ServiceClient("http://svc", { fetchFn, annotatorId: "kay" });
    const ack = await client.submitLabel(5, 2);
    expect(ack.pending).toBe(9);
    const init = fetchFn.mock.calls[0][1] as RequestInit;
    expect(JSON.parse(init.body as string)).toEqual({
      index: 5, class: 2, annotator_id: "kay",
    });
  });

  it("surfaces conflict bodies through ApiError", async () => {
    const fetchFn = vi.fn().mockResolvedValue(
      fakeResponse(409, { error: "conflicting label", committed_class: 1 }),
    );
    const client = new ServiceClient("http://svc", { fetchFn });
    const error = await client.submitLabel(3, 2).catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.status).toBe(409);
    expect(error.body.committed_class).toBe(1);
  });

  it("advance surfaces the remaining count on 409", async () => {
    const fetchFn = vi.fn().mockResolvedValue(
      fakeResponse(409, { error: "batch incomplete", remaining: 4 }),
    );
    const client = new ServiceClient("http://svc", { fetchFn });
    const error = await client.advanceRound().catch((e) => e);
    expect(error.body.remaining).toBe(4);
  });
});
