/** Response shapes of the ideastudio API (see docs/api in the service repo). */

export interface Counters {
  cycles: number;
  ideas_generated: number;
  ideas_used: number;
}

export interface CycleSummary {
  id: string;
  kind: 'brainstorm' | 'explore_more';
  instruction: string | null;
  source_image: string | null;
  source_card_id: string | null;
  card_count: number;
  complete: boolean;
}

export interface SessionView {
  id: string;
  name: string;
  created_at: string;
  counters: Counters;
  cycles: CycleSummary[];
}

export type CardState = 'generating' | 'ready' | 'failed';

export interface SlotView {
  index: number;
  score: number;
  state: 'pending' | 'ready' | 'failed';
  card_id: string | null;
  error: string | null;
}

export interface CardSummary {
  id: string;
  title: string;
  state: CardState;
  image_url: string | null;
  failure: string | null;
  created_at: string;
  used: boolean;
}

export interface CycleView {
  id: string;
  session_id: string;
  kind: 'brainstorm' | 'explore_more';
  instruction: string | null;
  source_image: string | null;
  source_card_id: string | null;
  slots: SlotView[];
  cards: CardSummary[];
  complete: boolean;
}

export interface Subcontent {
  name: string;
  description: string;
}

export interface Idea {
  theme: string;
  art_style: string;
  content: Subcontent[];
  lighting_atmosphere: string;
  color_palette: string;
  layout: string;
  shot_angle: string;
}

export interface KeywordGroup {
  subcontent_name: string;
  keywords: string[];
}

export interface Keywords {
  theme: string[];
  art_style: string[];
  content: KeywordGroup[];
  lighting_atmosphere: string[];
  color_palette: string[];
  shot_angle: string[];
}

export interface LineageStep {
  card_id: string;
  title: string;
  image_url: string | null;
  origin_kind:
    | 'brainstorm_root'
    | 'combined_with_reference'
    | 'refined_by_instruction'
    | 'explored_from';
  keyword: string | null;
  instruction: string | null;
  creative_score: number;
  reference_title: string | null;
  reference_thumbnail_url: string | null;
}

export interface CardView {
  id: string;
  session_id: string;
  cycle_id: string;
  title: string;
  state: CardState;
  used: boolean;
  idea: Idea;
  keywords: Keywords | null;
  keyword_warnings: string[];
  image_url: string | null;
  image_width: number | null;
  image_height: number | null;
  failure: string | null;
  created_at: string;
  lineage: LineageStep[];
}

export interface SearchResult {
  image_url: string;
  thumbnail_url: string;
  source_page_url: string;
  title: string;
  width: number;
  height: number;
}

export interface SearchView {
  keyword: string;
  page: number;
  results: SearchResult[];
}

/** Payload carried by card-level stream events. */
export interface CardEventPayload {
  card_id: string;
  title: string;
  has_keywords: boolean;
  has_image: boolean;
  image_blob_id: string | null;
  failure: string | null;
  state: CardState;
  slot?: number;
}
