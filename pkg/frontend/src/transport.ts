/**
 * HTTP + stream client for one session service.  Both the fetch function
 * and the WebSocket constructor are injected so tests (and the node-side
 * acceptance driver) can run without a browser.
 */

import {
  ControlAck,
  ControlRequest,
  CreateRequest,
  CreateResponse,
  Frame,
  isControlAck,
  isCreateResponse,
  parseFrame,
} from "./protocol.js";

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

/** The subset of the WebSocket API the stream reader relies on. */
export interface SocketLike {
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev: unknown) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

/** Raised when the server rejects a request; message is the server's own. */
export class ServerError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ServerError";
  }
}

async function errorDetail(response: {
  status: number;
  json(): Promise<unknown>;
}): Promise<string> {
  try {
    const body = (await response.json()) as Record<string, unknown>;
    if (typeof body.detail === "string") return body.detail;
  } catch {
    // fall through to the generic message
  }
  return `request failed with status ${response.status}`;
}

export interface StreamHandle {
  close(): void;
}

export class SessionClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike,
    private readonly socketFactory: SocketFactory,
  ) {}

  private async post(path: string, payload: unknown): Promise<unknown> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (!response.ok) {
      throw new ServerError(await errorDetail(response), response.status);
    }
    return response.json();
  }

  async createSession(request: CreateRequest): Promise<CreateResponse> {
    const body = await this.post("/sessions", request);
    if (!isCreateResponse(body)) {
      throw new Error("malformed create response");
    }
    return body;
  }

  async control(sessionId: string, request: ControlRequest): Promise<ControlAck> {
    const body = await this.post(`/sessions/${sessionId}/control`, request);
    if (!isControlAck(body)) {
      throw new Error("malformed control ack");
    }
    return body;
  }

  async snapshot(sessionId: string): Promise<unknown> {
    const response = await this.fetchFn(
      `${this.baseUrl}/sessions/${sessionId}/snapshot`,
    );
    if (!response.ok) {
      throw new ServerError(await errorDetail(response), response.status);
    }
    return response.json();
  }

  /**
   * Open the frame stream.  Messages that fail the frame guard are reported
   * through onError and skipped; the stream itself stays up.
   */
  openStream(
    sessionId: string,
    onFrame: (frame: Frame) => void,
    onError: (err: Error) => void = () => {},
    onClose: () => void = () => {},
  ): StreamHandle {
    const wsBase = this.baseUrl.replace(/^http/, "ws");
    const socket = this.socketFactory(`${wsBase}/sessions/${sessionId}/stream`);
    socket.onmessage = (ev) => {
      try {
        onFrame(parseFrame(String(ev.data)));
      } catch (err) {
        onError(err instanceof Error ? err : new Error(String(err)));
      }
    };
    socket.onerror = () => onError(new Error("stream transport error"));
    socket.onclose = () => onClose();
    return { close: () => socket.close() };
  }
}
