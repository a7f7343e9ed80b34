/** Keyword sidebar: the selected idea's key elements in six categories,
 * with Content grouped by subcontent. Every keyword is a search trigger;
 * a free-typed keyword is allowed but flagged as custom. */

import { clear, el } from '../dom.js';
import type { CardView, Keywords } from '../types.js';

export interface SidebarHandlers {
  onKeyword(keyword: string, freeTyped: boolean): void;
}

const CATEGORY_ORDER: Array<{ label: string; key: keyof Omit<Keywords, 'content'> | 'content' }> = [
  { label: 'Theme', key: 'theme' },
  { label: 'Art Style', key: 'art_style' },
  { label: 'Content', key: 'content' },
  { label: 'Lighting and Atmosphere', key: 'lighting_atmosphere' },
  { label: 'Color Palette', key: 'color_palette' },
  { label: 'Shot Angle', key: 'shot_angle' },
];

export class KeywordSidebar {
  readonly root: HTMLElement;
  private readonly list: HTMLElement;
  private active: string | null = null;

  constructor(private readonly handlers: SidebarHandlers) {
    this.list = el('div', { class: 'keyword-categories' });
    const input = el('input', {
      class: 'keyword-custom',
      type: 'search',
      placeholder: 'Search any keyword…',
      'aria-label': 'free keyword search',
    }) as HTMLInputElement;
    input.addEventListener('keydown', (event) => {
      if ((event as KeyboardEvent).key === 'Enter' && input.value.trim()) {
        this.handlers.onKeyword(input.value.trim(), true);
      }
    });
    this.root = el(
      'aside',
      { class: 'keyword-sidebar' },
      el('h3', { text: 'Key elements' }),
      input,
      this.list,
    );
  }

  render(card: CardView): void {
    clear(this.list);
    const keywords = card.keywords;
    if (!keywords) {
      this.list.append(el('p', { class: 'muted', text: 'Extracting keywords…' }));
      return;
    }
    for (const category of CATEGORY_ORDER) {
      const section = el('section', { class: 'keyword-category', 'data-category': category.key });
      section.append(el('h4', { text: category.label }));
      if (category.key === 'content') {
        for (const group of keywords.content) {
          const flagged = card.keyword_warnings.includes(group.subcontent_name);
          section.append(
            el(
              'h5',
              { class: flagged ? 'keyword-group flagged' : 'keyword-group' },
              group.subcontent_name,
              flagged
                ? el('span', {
                    class: 'flag',
                    text: ' ⚑',
                    title: 'does not match a section of this idea',
                  })
                : null,
            ),
          );
          section.append(this.chipList(group.keywords));
        }
      } else {
        section.append(this.chipList(keywords[category.key]));
      }
      this.list.append(section);
    }
    this.markActive(this.active);
  }

  markActive(keyword: string | null): void {
    this.active = keyword;
    for (const chip of Array.from(this.list.querySelectorAll('.keyword-chip'))) {
      chip.classList.toggle('active', keyword !== null && chip.textContent === keyword);
    }
  }

  categoryLabels(): string[] {
    return Array.from(this.list.querySelectorAll('.keyword-category > h4')).map(
      (node) => node.textContent ?? '',
    );
  }

  private chipList(keywords: string[]): HTMLElement {
    const list = el('div', { class: 'keyword-chips' });
    for (const keyword of keywords) {
      list.append(
        el('button', {
          class: 'keyword-chip',
          text: keyword,
          onclick: () => this.handlers.onKeyword(keyword, false),
        }),
      );
    }
    return list;
  }
}
