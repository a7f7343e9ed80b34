/** API client against the live mock-provider service. */

import { describe, expect, inject, it } from 'vitest';

import { ApiClient, ApiError } from '../src/api.js';
import { openStream } from '../src/sse.js';
import type { CycleView } from '../src/types.js';

const api = () => new ApiClient(inject('serverUrl'));

async function waitForCycle(client: ApiClient, cycleId: string): Promise<CycleView> {
  const deadline = Date.now() + 20000;
  for (;;) {
    const cycle = await client.getCycle(cycleId);
    if (cycle.complete) return cycle;
    if (Date.now() > deadline) throw new Error('cycle never completed');
    await new Promise((resolve) => setTimeout(resolve, 50));
  }
}

describe('api client', () => {
  it('creates sessions and runs a brainstorm to completion', async () => {
    const client = api();
    const session = await client.createSession('ui-api-test');
    expect(session.counters.ideas_generated).toBe(0);

    const cycleId = await client.brainstorm(session.id, 'a mossy canyon outpost', null);
    const cycle = await waitForCycle(client, cycleId);
    expect(cycle.cards).toHaveLength(8);
    expect(cycle.cards.every((card) => card.state === 'ready')).toBe(true);

    const card = await client.getCard(cycle.cards[0]!.id);
    expect(card.keywords).not.toBeNull();
    expect(card.image_width).toBe(1792);
    expect(card.image_height).toBe(1024);
    expect(card.lineage[0]!.origin_kind).toBe('brainstorm_root');
  });

  it('searches in 50-result pages', async () => {
    const client = api();
    const page0 = await client.search('antique telephone', 0);
    const page1 = await client.search('antique telephone', 1);
    expect(page0.results).toHaveLength(50);
    expect(page1.results).toHaveLength(50);
    const urls = new Set(page0.results.map((result) => result.image_url));
    expect(page1.results.some((result) => urls.has(result.image_url))).toBe(false);
  });

  it('maps error responses to typed failures', async () => {
    const client = api();
    await expect(client.getCard('card-missing')).rejects.toBeInstanceOf(ApiError);
    await expect(client.getCard('card-missing')).rejects.toMatchObject({ status: 404 });
  });

  it('streams refinement children live with pending-to-resolved ordering', async () => {
    // Subscribe to the parent cycle's stream first, so the refinement's
    // events are guaranteed to arrive live rather than via the snapshot.
    const client = api();
    const session = await client.createSession('ui-sse-test');
    const cycleId = await client.brainstorm(session.id, 'a tidal observatory', null);
    const cycle = await waitForCycle(client, cycleId);

    const seen: Array<{ type: string; cardId: string | null; state: string | null }> = [];
    let sawSnapshot: (() => void) | null = null;
    const snapshotSeen = new Promise<void>((resolve) => (sawSnapshot = resolve));
    let finished: (() => void) | null = null;
    const readyCards = new Set<string>();

    const handle = openStream(`${inject('serverUrl')}/api/cycles/${cycleId}/events`, {
      reconnect: false,
      onEvent: (event) => {
        if (event.type === 'cycle-state') {
          sawSnapshot?.();
          return;
        }
        const data = event.data as { card_id?: string; state?: string } | null;
        seen.push({
          type: event.type,
          cardId: data?.card_id ?? null,
          state: data?.state ?? null,
        });
        if (event.type === 'card-ready' && data?.card_id) {
          readyCards.add(data.card_id);
          if (readyCards.size === 5) finished?.();
        }
      },
    });

    await snapshotSeen;
    const childIds = await client.refine(cycle.cards[0]!.id, 'make it stormier');
    expect(childIds).toHaveLength(5);
    await new Promise<void>((resolve, reject) => {
      finished = resolve;
      if (readyCards.size === 5) resolve();
      setTimeout(() => reject(new Error(`only ${readyCards.size} children resolved`)), 25000);
    });
    handle.close();

    const created = seen.filter((event) => event.type === 'card-created');
    expect(created.map((event) => event.cardId).sort()).toEqual([...childIds].sort());
    for (const event of created) {
      expect(event.state).toBe('generating'); // announced pending first
      const index = seen.indexOf(event);
      const later = seen.slice(index + 1).filter((e) => e.cardId === event.cardId);
      expect(later.some((e) => e.type === 'card-keywords')).toBe(true);
      expect(later.some((e) => e.type === 'card-image')).toBe(true);
      expect(later.some((e) => e.type === 'card-ready')).toBe(true);
    }
  });
});
