// Typed client for the gateway HTTP API.

import type {
  Decision,
  FeedbackRow,
  ItemDetail,
  ItemStatus,
  OverlayIndex,
  QueuePayload,
} from "./types.js";

export class GatewayError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function asGatewayError(response: Response): Promise<GatewayError> {
  let code = "error";
  let message = `request failed with status ${response.status}`;
  try {
    const body = await response.json();
    code = body.error ?? code;
    message = body.message ?? message;
  } catch {
    // non-JSON error body; keep defaults
  }
  return new GatewayError(response.status, code, message);
}

export class GatewayClient {
  constructor(
    private baseUrl: string = "",
    private moderatorToken: string | null = null,
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private headers(): Record<string, string> {
    return this.moderatorToken ? { "x-moderator-token": this.moderatorToken } : {};
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      headers: this.headers(),
    });
    if (!response.ok) throw await asGatewayError(response);
    return (await response.json()) as T;
  }

  async loadQueue(status?: ItemStatus): Promise<QueuePayload> {
    const query = status ? `?status=${encodeURIComponent(status)}` : "";
    return this.getJson<QueuePayload>(`/v1/review/queue${query}`);
  }

  async getItem(itemId: string): Promise<ItemDetail> {
    return this.getJson<ItemDetail>(`/v1/review/${itemId}`);
  }

  async overlays(itemId: string): Promise<OverlayIndex> {
    return this.getJson<OverlayIndex>(`/v1/review/${itemId}/overlays`);
  }

  frameUrl(itemId: string, index: number): string {
    return `${this.baseUrl}/v1/review/${itemId}/frames/${index}`;
  }

  overlayUrl(itemId: string, index: number): string {
    return `${this.baseUrl}/v1/review/${itemId}/overlays/${index}`;
  }

  async submitDecision(
    itemId: string,
    decision: Decision,
    moderatorId: string,
  ): Promise<ItemDetail> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/v1/review/${itemId}/decision`,
      {
        method: "POST",
        headers: { "content-type": "application/json", ...this.headers() },
        body: JSON.stringify({ decision, moderator_id: moderatorId }),
      },
    );
    if (!response.ok) throw await asGatewayError(response);
    return (await response.json()) as ItemDetail;
  }

  async feedback(): Promise<{ rows: FeedbackRow[] }> {
    return this.getJson<{ rows: FeedbackRow[] }>("/v1/admin/feedback");
  }
}
