/** Typed client for the ideastudio HTTP API.
 *
 * The optional bearer token is sent as an Authorization header on fetches
 * and appended as a query parameter to URLs the browser loads directly
 * (images, event streams), which cannot carry headers.
 */

import type {
  CardView,
  CycleView,
  SearchView,
  SessionView,
  Counters,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    detail: string,
  ) {
    super(detail || code);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly token: string | null = null,
  ) {}

  private headers(json: boolean): Record<string, string> {
    const headers: Record<string, string> = {};
    if (json) headers['Content-Type'] = 'application/json';
    if (this.token) headers['Authorization'] = `Bearer ${this.token}`;
    return headers;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: this.headers(body !== undefined),
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (!response.ok) {
      let code = 'error';
      let detail = `${response.status}`;
      try {
        const payload = (await response.json()) as { error?: string; detail?: string };
        code = payload.error ?? code;
        detail = payload.detail ?? detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, code, detail);
    }
    return (await response.json()) as T;
  }

  /** Absolute URL for a browser-loaded resource, with the token attached. */
  resourceUrl(path: string): string {
    const url = this.baseUrl + path;
    if (!this.token) return url;
    return url + (url.includes('?') ? '&' : '?') + 'token=' + encodeURIComponent(this.token);
  }

  thumbnailUrl(remote: string): string {
    return this.resourceUrl(`/api/thumb?url=${encodeURIComponent(remote)}`);
  }

  createSession(name: string): Promise<SessionView> {
    return this.request('POST', '/api/sessions', { name });
  }

  listSessions(): Promise<SessionView[]> {
    return this.request('GET', '/api/sessions');
  }

  getSession(id: string): Promise<SessionView> {
    return this.request('GET', `/api/sessions/${id}`);
  }

  getStats(id: string): Promise<Counters> {
    return this.request('GET', `/api/sessions/${id}/stats`);
  }

  async brainstorm(sessionId: string, instruction: string | null, imageRef: string | null): Promise<string> {
    const body: Record<string, string> = {};
    if (instruction) body['instruction'] = instruction;
    if (imageRef) body['image_ref'] = imageRef;
    const response = await this.request<{ cycle_id: string }>(
      'POST',
      `/api/sessions/${sessionId}/brainstorm`,
      body,
    );
    return response.cycle_id;
  }

  getCycle(id: string): Promise<CycleView> {
    return this.request('GET', `/api/cycles/${id}`);
  }

  getCard(id: string): Promise<CardView> {
    return this.request('GET', `/api/cards/${id}`);
  }

  search(keyword: string, page: number, sessionId?: string): Promise<SearchView> {
    const params = new URLSearchParams({ keyword, page: String(page) });
    if (sessionId) params.set('session_id', sessionId);
    return this.request('GET', `/api/search?${params}`);
  }

  async combine(
    cardId: string,
    keyword: string,
    reference:
      | { image_url: string; thumbnail_url?: string; source_page_url?: string; title?: string }
      | { image_ref: string },
  ): Promise<string[]> {
    const response = await this.request<{ card_ids: string[] }>(
      'POST',
      `/api/cards/${cardId}/combine`,
      { keyword, reference },
    );
    return response.card_ids;
  }

  async refine(cardId: string, instruction: string): Promise<string[]> {
    const response = await this.request<{ card_ids: string[] }>(
      'POST',
      `/api/cards/${cardId}/refine`,
      { instruction },
    );
    return response.card_ids;
  }

  async explore(cardId: string, instruction: string | null): Promise<string> {
    const response = await this.request<{ cycle_id: string }>(
      'POST',
      `/api/cards/${cardId}/explore`,
      instruction ? { instruction } : {},
    );
    return response.cycle_id;
  }

  setUsed(cardId: string, used: boolean): Promise<Counters> {
    return this.request('POST', `/api/cards/${cardId}/used`, { used });
  }

  async uploadImage(file: File | Blob, name = 'upload.png'): Promise<string> {
    const form = new FormData();
    form.append('file', file, name);
    const response = await fetch(this.baseUrl + '/api/images', {
      method: 'POST',
      headers: this.headers(false),
      body: form,
    });
    if (!response.ok) throw new ApiError(response.status, 'upload', await response.text());
    const payload = (await response.json()) as { image_ref: string };
    return payload.image_ref;
  }

  /** URL of a cycle's server-sent event stream. */
  cycleEventsUrl(cycleId: string): string {
    return this.resourceUrl(`/api/cycles/${cycleId}/events`);
  }

  cardEventsUrl(cardId: string): string {
    return this.resourceUrl(`/api/cards/${cardId}/events`);
  }
}
