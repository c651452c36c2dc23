/** fetch + WebSocket transports for the console core. */

import type { HttpClient, HttpError, SocketFactory, SocketLike } from "./console-core.js";

export function makeHttpClient(baseUrl: string, fetchFn: typeof fetch = fetch): HttpClient {
  async function request(method: string, path: string, body?: unknown): Promise<any> {
    const response = await fetchFn(baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const payload = await response.json();
        detail = payload.detail ?? payload.error ?? detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      const error = new Error(`HTTP ${response.status}: ${detail}`) as HttpError;
      error.status = response.status;
      error.detail = detail;
      throw error;
    }
    if (response.status === 204) return undefined;
    return response.json();
  }
  return {
    getJson: (path) => request("GET", path),
    postJson: (path, body) => request("POST", path, body),
    del: async (path) => {
      await request("DELETE", path);
    },
  };
}

interface WebSocketCtor {
  new (url: string): {
    onmessage: ((event: { data: unknown }) => void) | null;
    onclose: (() => void) | null;
    onerror: ((error: unknown) => void) | null;
    close(): void;
  };
}

/** Wrap a browser (or `ws` package) WebSocket behind the SocketLike shim. */
export function makeSocketFactory(wsBaseUrl: string, ctor: WebSocketCtor): SocketFactory {
  return (path: string): SocketLike => {
    const raw = new ctor(wsBaseUrl + path);
    const shim: SocketLike = {
      onmessage: null,
      onclose: null,
      close: () => raw.close(),
    };
    raw.onmessage = (event) => shim.onmessage?.(String(event.data));
    raw.onclose = () => shim.onclose?.();
    raw.onerror = () => raw.close();
    return shim;
  };
}
