/** Ideas overview grid: one tile per fan-out slot, filled by cards as the
 * event stream delivers them. Tiles show the generated image with the
 * idea's title; pending tiles show a spinner, failed ones the error and a
 * retry control. */

import { clear, el } from '../dom.js';
import type { CardSummary, CycleView, SlotView } from '../types.js';

export interface OverviewHandlers {
  onSelectCard(cardId: string): void;
  /** Retry re-runs the cycle's originating operation (see tile tooltip). */
  onRetryCycle(cycle: CycleView): void;
}

interface TileState {
  root: HTMLElement;
  cardId: string | null;
}

export class OverviewGrid {
  readonly root: HTMLElement;
  private readonly grid: HTMLElement;
  private readonly heading: HTMLElement;
  private tiles = new Map<string, TileState>(); // key: slot-N or card id
  private cycle: CycleView | null = null;
  private selected: string | null = null;

  constructor(private readonly handlers: OverviewHandlers) {
    this.heading = el('h2', { class: 'overview-heading', text: 'Ideas' });
    this.grid = el('div', { class: 'overview-grid', role: 'list' });
    this.root = el('section', { class: 'overview' }, this.heading, this.grid);
  }

  renderCycle(cycle: CycleView): void {
    this.cycle = cycle;
    const label = cycle.kind === 'brainstorm' ? 'Brainstorm' : 'Explore more';
    this.heading.textContent = `${label}: ${cycle.instruction ?? 'from selected idea'}`;
    clear(this.grid);
    this.tiles.clear();
    const cards = new Map(cycle.cards.map((card) => [card.id, card]));
    for (const slot of cycle.slots) {
      const tile = this.buildSlotTile(slot, slot.card_id ? cards.get(slot.card_id) : undefined);
      this.grid.append(tile.root);
      this.tiles.set(this.slotKey(slot.index), tile);
      if (slot.card_id) this.tiles.set(slot.card_id, tile);
    }
    // refinement children belong to the cycle but have no slot of their own
    // in this view once re-rendered; list any cards not covered above
    for (const card of cycle.cards) {
      if (!this.tiles.has(card.id)) {
        const tile = this.buildCardTile(card);
        this.grid.append(tile.root);
        this.tiles.set(card.id, tile);
      }
    }
    this.markSelected(this.selected);
  }

  private slotKey(index: number): string {
    return `slot-${index}`;
  }

  /** Add or update a tile from a live card event. */
  upsertCard(card: CardSummary, slot?: number): void {
    let tile = this.tiles.get(card.id) ?? (slot !== undefined ? this.tiles.get(this.slotKey(slot)) : undefined);
    if (!tile) {
      tile = this.buildCardTile(card);
      this.grid.append(tile.root);
    } else {
      this.fillTile(tile, card);
    }
    this.tiles.set(card.id, tile);
    if (slot !== undefined) this.tiles.set(this.slotKey(slot), tile);
    this.markSelected(this.selected);
  }

  tileCount(): number {
    return this.grid.children.length;
  }

  cardStates(): Map<string, string> {
    const states = new Map<string, string>();
    for (const element of Array.from(this.grid.children)) {
      const id = element.getAttribute('data-card-id');
      const state = element.getAttribute('data-state');
      if (id && state) states.set(id, state);
    }
    return states;
  }

  markSelected(cardId: string | null): void {
    this.selected = cardId;
    for (const element of Array.from(this.grid.children)) {
      element.classList.toggle(
        'selected',
        cardId !== null && element.getAttribute('data-card-id') === cardId,
      );
    }
  }

  private buildSlotTile(slot: SlotView, card?: CardSummary): TileState {
    const root = el('article', { class: 'tile', role: 'listitem' });
    const tile: TileState = { root, cardId: null };
    if (card) {
      this.fillTile(tile, card);
    } else if (slot.error) {
      this.fillFailure(tile, slot.error);
    } else {
      this.fillPending(tile, `Generating idea ${slot.index + 1}…`);
    }
    return tile;
  }

  private buildCardTile(card: CardSummary): TileState {
    const tile: TileState = {
      root: el('article', { class: 'tile', role: 'listitem' }),
      cardId: null,
    };
    this.fillTile(tile, card);
    return tile;
  }

  private fillPending(tile: TileState, label: string): void {
    clear(tile.root);
    tile.root.setAttribute('data-state', 'pending');
    tile.root.append(
      el('div', { class: 'tile-spinner', 'aria-label': 'generating' }),
      el('p', { class: 'tile-title', text: label }),
    );
  }

  private fillFailure(tile: TileState, error: string): void {
    clear(tile.root);
    tile.root.setAttribute('data-state', 'failed');
    tile.root.append(
      el('p', { class: 'tile-error', text: error }),
      el('button', {
        class: 'tile-retry',
        text: 'Retry',
        title: 'Re-runs this cycle’s generation',
        onclick: () => this.cycle && this.handlers.onRetryCycle(this.cycle),
      }),
    );
  }

  private fillTile(tile: TileState, card: CardSummary): void {
    clear(tile.root);
    tile.cardId = card.id;
    tile.root.setAttribute('data-card-id', card.id);
    tile.root.setAttribute('data-state', card.state);
    const open = () => this.handlers.onSelectCard(card.id);
    if (card.state === 'failed' && !card.image_url) {
      tile.root.append(
        el('p', { class: 'tile-title', text: card.title }),
        el('p', { class: 'tile-error', text: card.failure ?? 'failed' }),
        el('button', {
          class: 'tile-retry',
          text: 'Retry',
          title: 'Re-runs this cycle’s generation',
          onclick: () => this.cycle && this.handlers.onRetryCycle(this.cycle),
        }),
      );
      return;
    }
    if (card.image_url) {
      tile.root.append(
        el('img', {
          class: 'tile-image',
          src: card.image_url,
          alt: card.title,
          loading: 'lazy',
          onclick: open,
        }),
      );
    } else {
      tile.root.append(el('div', { class: 'tile-spinner', 'aria-label': 'rendering' }));
    }
    tile.root.append(
      el(
        'p',
        { class: 'tile-title' },
        el('button', { class: 'tile-open', text: card.title, onclick: open }),
        card.used ? el('span', { class: 'tile-used', text: '★ used', title: 'marked as used' }) : null,
      ),
    );
    if (card.state === 'generating') {
      tile.root.append(el('p', { class: 'tile-note', text: 'keywords & image on the way…' }));
    }
    if (card.state === 'failed') {
      tile.root.append(el('p', { class: 'tile-error', text: card.failure ?? 'partial failure' }));
    }
  }
}
