/** Server-sent-events reader built on fetch streaming.
 *
 * Native EventSource cannot send Authorization headers and is missing from
 * some test environments, so frames are parsed off a fetch body stream.
 * The server opens every stream with a full state snapshot, which makes
 * reconnects (with or without Last-Event-ID) safe: events carry complete
 * summaries and are applied idempotently.
 */

export interface StreamEvent {
  id: number;
  type: string;
  data: unknown;
}

export interface StreamHandle {
  close(): void;
  /** Resolves when the stream ends (server closed it or close() called). */
  done: Promise<void>;
}

export interface StreamOptions {
  onEvent: (event: StreamEvent) => void;
  onError?: (error: unknown) => void;
  /** Reconnect automatically when the connection drops (default true). */
  reconnect?: boolean;
  headers?: Record<string, string>;
}

const RECONNECT_DELAY_MS = 2000;

function parseFrame(frame: string): StreamEvent | null {
  let id = 0;
  let type = '';
  const dataLines: string[] = [];
  for (const line of frame.split('\n')) {
    if (line.startsWith('id: ')) id = Number(line.slice(4)) || 0;
    else if (line.startsWith('event: ')) type = line.slice(7);
    else if (line.startsWith('data: ')) dataLines.push(line.slice(6));
  }
  if (!type) return null; // comment/keepalive frame
  let data: unknown = null;
  if (dataLines.length) {
    try {
      data = JSON.parse(dataLines.join('\n'));
    } catch {
      data = dataLines.join('\n');
    }
  }
  return { id, type, data };
}

export function openStream(url: string, options: StreamOptions): StreamHandle {
  const controller = new AbortController();
  let lastId = 0;
  let closed = false;

  const done = (async () => {
    while (!closed) {
      try {
        const headers: Record<string, string> = {
          Accept: 'text/event-stream',
          ...options.headers,
        };
        if (lastId > 0) headers['Last-Event-ID'] = String(lastId);
        const response = await fetch(url, { headers, signal: controller.signal });
        if (!response.ok || !response.body) {
          throw new Error(`event stream failed: ${response.status}`);
        }
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        let buffer = '';
        for (;;) {
          const { value, done: eof } = await reader.read();
          if (eof) break;
          buffer += decoder.decode(value, { stream: true });
          let split;
          while ((split = buffer.indexOf('\n\n')) >= 0) {
            const frame = buffer.slice(0, split);
            buffer = buffer.slice(split + 2);
            const event = parseFrame(frame);
            if (event) {
              if (event.id > 0) lastId = event.id;
              options.onEvent(event);
            }
          }
        }
        // Clean end of stream: either the subject reached a final state
        // (one-shot readers stop here) or the server went away and a
        // long-lived subscription should re-attach for a fresh snapshot.
        if (options.reconnect === false) return;
        await new Promise((resolve) => setTimeout(resolve, RECONNECT_DELAY_MS));
      } catch (error) {
        if (closed || controller.signal.aborted) return;
        options.onError?.(error);
        if (options.reconnect === false) return;
        await new Promise((resolve) => setTimeout(resolve, RECONNECT_DELAY_MS));
      }
    }
  })();

  return {
    close() {
      closed = true;
      controller.abort();
    },
    done,
  };
}
