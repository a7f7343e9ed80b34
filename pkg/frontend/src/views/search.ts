/** Reference search pane: pages of results for the selected keyword, with
 * infinite scroll (reaching the end of the pane requests the next page).
 * Clicking a result selects it as the combine reference; secondary click
 * opens its source page for provenance. Results are draggable onto the
 * refine pane. */

import { clear, el } from '../dom.js';
import type { SearchResult } from '../types.js';

export interface SearchHandlers {
  onNeedPage(keyword: string, page: number): void;
  onPickReference(result: SearchResult): void;
  onOpenSource(result: SearchResult): void;
  thumbnailUrl(remote: string): string;
}

const SCROLL_THRESHOLD_PX = 80;

export class SearchPane {
  readonly root: HTMLElement;
  private readonly heading: HTMLElement;
  private readonly grid: HTMLElement;
  private keyword: string | null = null;
  private nextPage = 0;
  private loading = false;
  private exhausted = false;
  private picked: string | null = null;

  constructor(private readonly handlers: SearchHandlers) {
    this.heading = el('h3', { class: 'search-heading', text: 'Reference search' });
    this.grid = el('div', { class: 'search-grid' });
    this.root = el('section', { class: 'search-pane' }, this.heading, this.grid);
    this.root.addEventListener('scroll', () => this.maybeLoadMore());
  }

  showKeyword(keyword: string, freeTyped: boolean): void {
    this.keyword = keyword;
    this.nextPage = 0;
    this.exhausted = false;
    this.loading = true;
    this.heading.textContent = freeTyped ? `“${keyword}” (custom)` : `“${keyword}”`;
    clear(this.grid);
    this.handlers.onNeedPage(keyword, 0);
  }

  appendResults(keyword: string, page: number, results: SearchResult[], pageSize = 50): void {
    if (keyword !== this.keyword) return; // stale response
    this.loading = false;
    this.nextPage = page + 1;
    if (results.length < pageSize) this.exhausted = true;
    for (const result of results) {
      this.grid.append(this.buildResult(result));
    }
  }

  loadedCount(): number {
    return this.grid.children.length;
  }

  activeKeyword(): string | null {
    return this.keyword;
  }

  private maybeLoadMore(): void {
    if (!this.keyword || this.loading || this.exhausted) return;
    const nearBottom =
      this.root.scrollTop + this.root.clientHeight >= this.root.scrollHeight - SCROLL_THRESHOLD_PX;
    if (nearBottom) {
      this.loading = true;
      this.handlers.onNeedPage(this.keyword, this.nextPage);
    }
  }

  private buildResult(result: SearchResult): HTMLElement {
    const item = el(
      'figure',
      { class: 'search-result', draggable: 'true', 'data-image-url': result.image_url },
      el('img', {
        src: this.handlers.thumbnailUrl(result.thumbnail_url),
        alt: result.title,
        loading: 'lazy',
      }),
      el('figcaption', { text: result.title }),
    );
    item.addEventListener('click', () => {
      this.markPicked(result.image_url);
      this.handlers.onPickReference(result);
    });
    item.addEventListener('auxclick', (event) => {
      if ((event as MouseEvent).button === 1) this.handlers.onOpenSource(result);
    });
    item.addEventListener('contextmenu', (event) => {
      event.preventDefault();
      this.handlers.onOpenSource(result);
    });
    item.addEventListener('dragstart', (event) => {
      (event as DragEvent).dataTransfer?.setData(
        'application/x-search-result',
        JSON.stringify(result),
      );
    });
    return item;
  }

  private markPicked(imageUrl: string): void {
    this.picked = imageUrl;
    for (const node of Array.from(this.grid.children)) {
      node.classList.toggle('picked', node.getAttribute('data-image-url') === imageUrl);
    }
  }
}
