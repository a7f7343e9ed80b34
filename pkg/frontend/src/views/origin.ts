/** Origin strip: the selected card's full ancestry, root first. Each step
 * shows the ancestor's thumbnail; derivation edges are annotated with how
 * the child was made (combined keyword + reference thumbnail, refining
 * instruction, or explore-more). Clicking an ancestor selects it. */

import { clear, el } from '../dom.js';
import type { CardView, LineageStep } from '../types.js';

export interface OriginHandlers {
  onSelectCard(cardId: string): void;
}

function edgeLabel(step: LineageStep): string {
  switch (step.origin_kind) {
    case 'combined_with_reference':
      return `combined with “${step.keyword ?? ''}”`;
    case 'refined_by_instruction':
      return `refined: “${step.instruction ?? ''}”`;
    case 'explored_from':
      return step.instruction ? `explored: “${step.instruction}”` : 'explored from';
    default:
      return 'brainstormed';
  }
}

export class OriginStrip {
  readonly root: HTMLElement;
  private readonly track: HTMLElement;

  constructor(private readonly handlers: OriginHandlers) {
    this.track = el('div', { class: 'origin-track' });
    this.root = el(
      'section',
      { class: 'origin-strip' },
      el('h3', { text: 'Origin' }),
      this.track,
    );
  }

  render(card: CardView): void {
    clear(this.track);
    card.lineage.forEach((step, index) => {
      if (index > 0) {
        const edge = el('div', { class: 'origin-edge' }, el('span', { text: '→ ' + edgeLabel(step) }));
        if (step.origin_kind === 'combined_with_reference' && step.reference_thumbnail_url) {
          edge.append(
            el('img', {
              class: 'origin-reference',
              src: step.reference_thumbnail_url,
              alt: step.reference_title ?? 'reference',
              title: step.reference_title ?? 'reference',
            }),
          );
        }
        this.track.append(edge);
      }
      const isSelf = step.card_id === card.id;
      const node = el(
        'figure',
        { class: isSelf ? 'origin-node self' : 'origin-node', 'data-card-id': step.card_id },
        step.image_url
          ? el('img', { src: step.image_url, alt: step.title })
          : el('div', { class: 'origin-placeholder' }),
        el('figcaption', { text: step.title }),
      );
      if (!isSelf) {
        node.addEventListener('click', () => this.handlers.onSelectCard(step.card_id));
      }
      this.track.append(node);
    });
  }

  stepCardIds(): string[] {
    return Array.from(this.track.querySelectorAll('.origin-node')).map(
      (node) => node.getAttribute('data-card-id') ?? '',
    );
  }
}
