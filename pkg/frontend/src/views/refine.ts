/** Refine pane: three ways forward from the selected idea — combine with a
 * reference located by a keyword, rewrite by instruction, or seed the next
 * cycle ("explore more"). Creative scores stay a server-side schedule; an
 * advanced flag reveals a read-only note about it. */

import { clear, el } from '../dom.js';
import type { SearchResult } from '../types.js';

export type RefineMode = 'combine' | 'instruct' | 'explore';

export interface RefineHandlers {
  onCombine(keyword: string, reference: SearchResult): void;
  onInstruct(instruction: string): void;
  onExplore(instruction: string | null): void;
}

export class RefinePane {
  readonly root: HTMLElement;
  private mode: RefineMode = 'combine';
  private keyword: string | null = null;
  private reference: SearchResult | null = null;
  private readonly body: HTMLElement;
  private readonly tabs: HTMLElement;
  private busy = false;

  constructor(
    private readonly handlers: RefineHandlers,
    private readonly advanced = false,
  ) {
    this.tabs = el('div', { class: 'refine-tabs', role: 'tablist' });
    this.body = el('div', { class: 'refine-body' });
    this.root = el(
      'section',
      { class: 'refine-pane' },
      el('h3', { text: 'Refine this idea' }),
      this.tabs,
      this.body,
    );
    this.renderTabs();
    this.renderBody();
  }

  setKeyword(keyword: string | null): void {
    this.keyword = keyword;
    if (this.mode === 'combine') this.renderBody();
  }

  setReference(reference: SearchResult | null): void {
    this.reference = reference;
    if (this.mode === 'combine') this.renderBody();
  }

  setBusy(busy: boolean): void {
    this.busy = busy;
    this.renderBody();
  }

  currentMode(): RefineMode {
    return this.mode;
  }

  private switchMode(mode: RefineMode): void {
    this.mode = mode;
    this.renderTabs();
    this.renderBody();
  }

  private renderTabs(): void {
    clear(this.tabs);
    const labels: Array<[RefineMode, string]> = [
      ['combine', 'Combine reference'],
      ['instruct', 'By instruction'],
      ['explore', 'Explore more'],
    ];
    for (const [mode, label] of labels) {
      this.tabs.append(
        el('button', {
          class: this.mode === mode ? 'refine-tab active' : 'refine-tab',
          role: 'tab',
          'data-mode': mode,
          text: label,
          onclick: () => this.switchMode(mode),
        }),
      );
    }
  }

  private renderBody(): void {
    clear(this.body);
    if (this.mode === 'combine') this.renderCombine();
    else if (this.mode === 'instruct') this.renderInstruct();
    else this.renderExplore();
    if (this.advanced) {
      this.body.append(
        el('p', {
          class: 'muted advanced-note',
          text: 'Creative scores are scheduled server-side, spread evenly from 0 to 1 across the batch.',
        }),
      );
    }
  }

  private renderCombine(): void {
    const dropZone = el(
      'div',
      { class: 'drop-zone', 'data-drop': 'reference' },
      this.reference
        ? el(
            'figure',
            { class: 'picked-reference' },
            el('img', { src: this.reference.thumbnail_url, alt: this.reference.title }),
            el('figcaption', { text: this.reference.title }),
          )
        : el('p', { class: 'muted', text: 'Drag a search result here, or click one to select it.' }),
    );
    dropZone.addEventListener('dragover', (event) => event.preventDefault());
    dropZone.addEventListener('drop', (event) => {
      event.preventDefault();
      const raw = (event as DragEvent).dataTransfer?.getData('application/x-search-result');
      if (raw) {
        try {
          this.setReference(JSON.parse(raw) as SearchResult);
        } catch {
          // not a search result payload; ignore the drop
        }
      }
    });
    const note = el('p', { class: 'refine-validation', role: 'alert' });
    const ready = this.keyword && this.reference && !this.busy;
    this.body.append(
      el(
        'p',
        { class: 'refine-context' },
        'Keyword: ',
        this.keyword
          ? el('span', { class: 'keyword-chip active', text: this.keyword })
          : el('span', { class: 'muted', text: 'pick one in the sidebar' }),
      ),
      dropZone,
      el('button', {
        class: 'refine-submit',
        text: this.busy ? 'Combining…' : 'Combine into 5 variations',
        disabled: !ready,
        onclick: () => {
          if (!this.keyword || !this.reference) {
            note.textContent = 'Select a keyword and a reference first.';
            return;
          }
          this.handlers.onCombine(this.keyword, this.reference);
        },
      }),
      note,
    );
  }

  private renderInstruct(): void {
    const input = el('textarea', {
      class: 'refine-instruction',
      placeholder: 'e.g. make the palette warmer, add market crowds…',
      rows: '3',
    }) as HTMLTextAreaElement;
    const note = el('p', { class: 'refine-validation', role: 'alert' });
    this.body.append(
      input,
      el('button', {
        class: 'refine-submit',
        text: this.busy ? 'Refining…' : 'Refine into 5 variations',
        disabled: this.busy,
        onclick: () => {
          const instruction = input.value.trim();
          if (!instruction) {
            note.textContent = 'Write an instruction first.';
            return; // no request leaves this pane
          }
          note.textContent = '';
          this.handlers.onInstruct(instruction);
        },
      }),
      note,
    );
  }

  private renderExplore(): void {
    const input = el('input', {
      class: 'refine-instruction',
      type: 'text',
      placeholder: 'optional direction, e.g. design a kitchen based on this',
    }) as HTMLInputElement;
    this.body.append(
      el('p', {
        class: 'muted',
        text: 'Starts the next full brainstorming cycle seeded by this idea.',
      }),
      input,
      el('button', {
        class: 'refine-submit',
        text: this.busy ? 'Starting cycle…' : 'Explore more',
        disabled: this.busy,
        onclick: () => this.handlers.onExplore(input.value.trim() || null),
      }),
    );
  }
}
