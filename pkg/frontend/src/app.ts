/** Application shell: wires the API client, event streams, and panels.
 *
 * Layout mirrors the working loop: an ideas overview grid on top, and a
 * detail area for the selected idea — keyword sidebar on the left, search
 * results in the middle, refine controls on the right, and the origin
 * strip underneath. All server interaction is asynchronous; card and
 * cycle state arrives over server-sent events and is applied idempotently.
 */

import { ApiClient, ApiError } from './api.js';
import { clear, el } from './dom.js';
import { openStream, type StreamHandle } from './sse.js';
import type {
  CardEventPayload,
  CardSummary,
  CardView,
  CycleView,
  SearchResult,
  SessionView,
} from './types.js';
import { OriginStrip } from './views/origin.js';
import { OverviewGrid } from './views/overview.js';
import { RefinePane } from './views/refine.js';
import { SearchPane } from './views/search.js';
import { KeywordSidebar } from './views/sidebar.js';

export interface AppOptions {
  baseUrl?: string;
  token?: string | null;
  advanced?: boolean;
  /** Open external pages (overridable in tests). */
  openExternal?: (url: string) => void;
}

interface SelectedKeyword {
  text: string;
  freeTyped: boolean;
}

export class App {
  readonly api: ApiClient;
  readonly root: HTMLElement;

  readonly overview: OverviewGrid;
  readonly sidebar: KeywordSidebar;
  readonly search: SearchPane;
  readonly refine: RefinePane;
  readonly origin: OriginStrip;

  session: SessionView | null = null;
  cycle: CycleView | null = null;
  card: CardView | null = null;
  keyword: SelectedKeyword | null = null;

  private cycleStream: StreamHandle | null = null;
  private readonly statusBar: HTMLElement;
  private readonly sessionBar: HTMLElement;
  private readonly cycleNav: HTMLElement;
  private readonly detail: HTMLElement;
  private readonly cardPanel: HTMLElement;
  private readonly openExternal: (url: string) => void;

  constructor(private readonly options: AppOptions = {}) {
    this.api = new ApiClient(options.baseUrl ?? '', options.token ?? null);
    this.openExternal = options.openExternal ?? ((url) => window.open(url, '_blank', 'noopener'));

    this.overview = new OverviewGrid({
      onSelectCard: (id) => void this.selectCard(id),
      onRetryCycle: (cycle) => void this.retryCycle(cycle),
    });
    this.sidebar = new KeywordSidebar({
      onKeyword: (keyword, freeTyped) => void this.selectKeyword(keyword, freeTyped),
    });
    this.search = new SearchPane({
      onNeedPage: (keyword, page) => void this.loadSearchPage(keyword, page),
      onPickReference: (result) => this.refine.setReference(result),
      onOpenSource: (result) => this.openExternal(result.source_page_url),
      thumbnailUrl: (remote) => this.api.thumbnailUrl(remote),
    });
    this.refine = new RefinePane(
      {
        onCombine: (keyword, reference) => void this.combine(keyword, reference),
        onInstruct: (instruction) => void this.instruct(instruction),
        onExplore: (instruction) => void this.explore(instruction),
      },
      options.advanced ?? false,
    );
    this.origin = new OriginStrip({ onSelectCard: (id) => void this.selectCard(id) });

    this.statusBar = el('div', { class: 'status-bar', role: 'status' });
    this.sessionBar = el('div', { class: 'session-bar' });
    this.cycleNav = el('nav', { class: 'cycle-nav' });
    this.cardPanel = el('div', { class: 'card-panel' });
    this.detail = el(
      'section',
      { class: 'detail hidden' },
      this.cardPanel,
      el(
        'div',
        { class: 'detail-columns' },
        this.sidebar.root,
        this.search.root,
        this.refine.root,
      ),
      this.origin.root,
    );
    this.root = el(
      'main',
      { class: 'app' },
      this.sessionBar,
      this.statusBar,
      this.cycleNav,
      this.overview.root,
      this.detail,
    );
  }

  // -- bootstrap ------------------------------------------------------------

  async init(sessionName = 'My ideation session'): Promise<void> {
    const sessions = await this.api.listSessions();
    const session = sessions.length
      ? sessions[sessions.length - 1]!
      : await this.api.createSession(sessionName);
    await this.setSession(session.id);
  }

  async setSession(sessionId: string): Promise<void> {
    this.session = await this.api.getSession(sessionId);
    this.renderSessionBar();
    this.renderCycleNav();
    const cycles = this.session.cycles;
    if (cycles.length) {
      await this.openCycle(cycles[cycles.length - 1]!.id);
    }
  }

  private renderSessionBar(): void {
    if (!this.session) return;
    clear(this.sessionBar);
    const counters = this.session.counters;
    const instruction = el('input', {
      class: 'brainstorm-input',
      type: 'text',
      placeholder: 'Describe the environment to design…',
      'aria-label': 'brainstorm instruction',
    }) as HTMLInputElement;
    const file = el('input', {
      class: 'brainstorm-image',
      type: 'file',
      accept: 'image/*',
      'aria-label': 'optional reference image',
    }) as HTMLInputElement;
    this.sessionBar.append(
      el('h1', { text: this.session.name }),
      el('span', {
        class: 'session-counters',
        text: `${counters.cycles} cycles · ${counters.ideas_generated} ideas · ${counters.ideas_used} used`,
      }),
      instruction,
      file,
      el('button', {
        class: 'brainstorm-go',
        text: 'Brainstorm',
        onclick: () => void this.brainstorm(instruction.value, file.files?.[0] ?? null),
      }),
    );
  }

  private renderCycleNav(): void {
    if (!this.session) return;
    clear(this.cycleNav);
    this.session.cycles.forEach((cycle, index) => {
      this.cycleNav.append(
        el('button', {
          class: this.cycle?.id === cycle.id ? 'cycle-link active' : 'cycle-link',
          'data-cycle-id': cycle.id,
          text: `Cycle ${index + 1}${cycle.kind === 'explore_more' ? ' ↪' : ''}`,
          title: cycle.instruction ?? 'from selected idea',
          onclick: () => void this.openCycle(cycle.id),
        }),
      );
    });
  }

  // -- cycles ---------------------------------------------------------------

  async brainstorm(instruction: string, file: File | Blob | null): Promise<void> {
    const text = instruction.trim();
    if (!text && !file) {
      this.setStatus('Give an instruction or an image to brainstorm from.', true);
      return;
    }
    try {
      const imageRef = file ? await this.api.uploadImage(file) : null;
      const cycleId = await this.api.brainstorm(this.session!.id, text || null, imageRef);
      await this.refreshSession();
      await this.openCycle(cycleId);
    } catch (error) {
      this.showError(error);
    }
  }

  async openCycle(cycleId: string): Promise<void> {
    this.cycleStream?.close();
    this.cycle = await this.api.getCycle(cycleId);
    this.overview.renderCycle(this.cycle);
    this.renderCycleNav();
    this.setStatus(this.cycle.complete ? '' : 'Generating ideas…');
    this.cycleStream = openStream(this.api.cycleEventsUrl(cycleId), {
      onEvent: (event) => void this.onCycleEvent(event.type, event.data),
      onError: () => this.setStatus('Connection lost, retrying…', true),
    });
  }

  private async onCycleEvent(type: string, data: unknown): Promise<void> {
    if (type === 'cycle-state') {
      const view = data as CycleView;
      this.cycle = view;
      this.overview.renderCycle(view);
      if (view.complete) this.setStatus('');
      return;
    }
    if (type === 'slot-failed') {
      if (this.cycle) {
        this.cycle = await this.api.getCycle(this.cycle.id);
        this.overview.renderCycle(this.cycle);
      }
      return;
    }
    if (type === 'cycle-complete') {
      if (this.cycle) {
        this.cycle = await this.api.getCycle(this.cycle.id);
        this.overview.renderCycle(this.cycle);
      }
      this.setStatus('');
      await this.refreshSession();
      return;
    }
    const payload = data as CardEventPayload;
    if (!payload?.card_id) return;
    this.overview.upsertCard(this.summaryFromEvent(payload), payload.slot);
    if (this.card && payload.card_id === this.card.id && type !== 'card-created') {
      await this.refreshSelectedCard();
    }
  }

  private summaryFromEvent(payload: CardEventPayload): CardSummary {
    return {
      id: payload.card_id,
      title: payload.title,
      state: payload.state,
      image_url: payload.image_blob_id
        ? this.api.resourceUrl(`/api/blobs/${payload.image_blob_id}`)
        : null,
      failure: payload.failure,
      created_at: new Date().toISOString(),
      used: false,
    };
  }

  async retryCycle(cycle: CycleView): Promise<void> {
    // Re-runs the cycle's originating operation in a fresh cycle.
    try {
      if (cycle.kind === 'explore_more' && cycle.source_card_id) {
        const cycleId = await this.api.explore(cycle.source_card_id, cycle.instruction);
        await this.refreshSession();
        await this.openCycle(cycleId);
      } else {
        await this.brainstorm(cycle.instruction ?? '', null);
      }
    } catch (error) {
      this.showError(error);
    }
  }

  private async refreshSession(): Promise<void> {
    if (!this.session) return;
    this.session = await this.api.getSession(this.session.id);
    this.renderSessionBar();
    this.renderCycleNav();
  }

  // -- card selection ---------------------------------------------------------

  async selectCard(cardId: string): Promise<void> {
    try {
      this.card = await this.api.getCard(cardId);
    } catch (error) {
      this.showError(error);
      return;
    }
    this.keyword = null;
    this.detail.classList.remove('hidden');
    this.overview.markSelected(cardId);
    this.renderCardPanel();
    this.sidebar.render(this.card);
    this.sidebar.markActive(null);
    this.refine.setKeyword(null);
    this.refine.setReference(null);
    this.origin.render(this.card);
  }

  private async refreshSelectedCard(): Promise<void> {
    if (!this.card) return;
    this.card = await this.api.getCard(this.card.id);
    this.renderCardPanel();
    this.sidebar.render(this.card);
    this.sidebar.markActive(this.keyword?.text ?? null);
    this.origin.render(this.card);
  }

  private renderCardPanel(): void {
    const card = this.card;
    if (!card) return;
    clear(this.cardPanel);
    const idea = card.idea;
    const sections: Array<[string, string]> = [
      ['Theme', idea.theme],
      ['Art Style', idea.art_style],
      ['Lighting and Atmosphere', idea.lighting_atmosphere],
      ['Color Palette', idea.color_palette],
      ['Layout', idea.layout],
      ['Shot Angle', idea.shot_angle],
    ];
    const description = el('details', { class: 'idea-text' }, el('summary', { text: 'Full description' }));
    for (const [label, text] of sections) {
      description.append(el('p', {}, el('strong', { text: label + ': ' }), text));
    }
    const contentList = el('ul', {});
    for (const sub of idea.content) {
      contentList.append(el('li', {}, el('strong', { text: sub.name + ': ' }), sub.description));
    }
    description.append(el('p', {}, el('strong', { text: 'Content:' })), contentList);
    this.cardPanel.append(
      el(
        'div',
        { class: 'card-hero' },
        card.image_url
          ? el('img', { class: 'card-image', src: card.image_url, alt: card.title })
          : el('div', { class: 'tile-spinner' }),
        el(
          'div',
          { class: 'card-meta' },
          el('h2', { text: card.title }),
          el('p', { class: 'muted', text: `state: ${card.state}` }),
          card.failure ? el('p', { class: 'tile-error', text: card.failure }) : null,
          el('button', {
            class: 'used-toggle',
            'data-used': card.used ? 'yes' : 'no',
            text: card.used ? '★ Used in final output' : '☆ Mark as used',
            onclick: () => void this.toggleUsed(),
          }),
          description,
        ),
      ),
    );
  }

  async toggleUsed(): Promise<void> {
    if (!this.card) return;
    const target = !this.card.used;
    try {
      await this.api.setUsed(this.card.id, target);
      await this.refreshSelectedCard();
      await this.refreshSession();
      if (this.cycle) {
        this.cycle = await this.api.getCycle(this.cycle.id);
        this.overview.renderCycle(this.cycle);
        this.overview.markSelected(this.card?.id ?? null);
      }
    } catch (error) {
      this.showError(error);
    }
  }

  // -- research ----------------------------------------------------------------

  async selectKeyword(keyword: string, freeTyped: boolean): Promise<void> {
    this.keyword = { text: keyword, freeTyped };
    this.sidebar.markActive(freeTyped ? null : keyword);
    this.refine.setKeyword(keyword);
    this.search.showKeyword(keyword, freeTyped);
  }

  private async loadSearchPage(keyword: string, page: number): Promise<void> {
    try {
      const view = await this.api.search(keyword, page, this.session?.id);
      this.search.appendResults(keyword, page, view.results);
    } catch (error) {
      this.showError(error);
    }
  }

  // -- refinement ----------------------------------------------------------------

  async combine(keyword: string, reference: SearchResult): Promise<void> {
    if (!this.card) return;
    this.refine.setBusy(true);
    try {
      const ids = await this.api.combine(this.card.id, keyword, {
        image_url: reference.image_url,
        thumbnail_url: reference.thumbnail_url,
        source_page_url: reference.source_page_url,
        title: reference.title,
      });
      this.showPendingChildren(ids);
    } catch (error) {
      this.showError(error);
    } finally {
      this.refine.setBusy(false);
    }
  }

  async instruct(instruction: string): Promise<void> {
    if (!this.card) return;
    this.refine.setBusy(true);
    try {
      const ids = await this.api.refine(this.card.id, instruction);
      this.showPendingChildren(ids);
    } catch (error) {
      this.showError(error);
    } finally {
      this.refine.setBusy(false);
    }
  }

  /** Children appear as pending tiles at once; the cycle's event stream
   * resolves them as keywords and images land. */
  private showPendingChildren(ids: string[]): void {
    for (const id of ids) {
      this.overview.upsertCard({
        id,
        title: 'New variation…',
        state: 'generating',
        image_url: null,
        failure: null,
        created_at: new Date().toISOString(),
        used: false,
      });
    }
    this.setStatus(`${ids.length} variations on the way…`);
  }

  async explore(instruction: string | null): Promise<void> {
    if (!this.card) return;
    this.refine.setBusy(true);
    try {
      const cycleId = await this.api.explore(this.card.id, instruction);
      await this.refreshSession();
      await this.openCycle(cycleId); // navigate to the new cycle
    } catch (error) {
      this.showError(error);
    } finally {
      this.refine.setBusy(false);
    }
  }

  // -- status -----------------------------------------------------------------

  setStatus(message: string, isError = false): void {
    this.statusBar.textContent = message;
    this.statusBar.classList.toggle('error', isError);
  }

  private showError(error: unknown): void {
    if (error instanceof ApiError) {
      this.setStatus(`${error.code}: ${error.message}`, true);
    } else {
      this.setStatus(String(error), true);
    }
  }

  dispose(): void {
    this.cycleStream?.close();
  }
}
