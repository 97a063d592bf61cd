/** Wire types mirroring the session service's JSON bodies. */

export type RoleName = 'protagonist' | 'opportunity' | 'challenge';

export const ROLES: RoleName[] = ['protagonist', 'opportunity', 'challenge'];

export interface ImageRef {
  content_address: string;
  media_type: 'png' | 'jpeg';
  width: number;
  height: number;
}

export interface ParticipantView {
  id: string;
  display_name: string;
  role: RoleName | null;
  is_facilitator: boolean;
}

export interface CharacterView {
  name: string;
  source_image: ImageRef | null;
  avatar: ImageRef | null;
  style_tokens: string;
  confirmed: boolean;
}

export interface SegmentView {
  chapter_index: number;
  player_input: string;
  paragraphs: string[];
  illustrations: ImageRef[];
  generation_meta: { backend_id: string; duration_ms: number; regenerations: number };
}

export interface ScenarioCard {
  id: string;
  title: string;
  setting_description: string;
}

/**
 * Mirror of GET /sessions/{id}. The server is the only authority: the turn
 * indicator and every control derives from this snapshot, never from local
 * inference.
 */
export interface ClientSessionView {
  id: string;
  phase: string;
  scenario: ScenarioCard | null;
  participants: ParticipantView[];
  character: CharacterView | null;
  segments: Record<string, SegmentView>;
  current_turn: RoleName | null;
  inquiry: string | null;
  active_job_id: string | null;
  regen_counts: Record<string, number>;
  created_at: number;
  updated_at: number;
}

export interface JobStatus {
  job_id: string;
  kind: string;
  state: 'pending' | 'running' | 'done' | 'failed';
  started_at: number;
  finished_at: number | null;
  result: Record<string, unknown> | null;
  error: { kind: string; message: string } | null;
}

export interface JoinResult {
  participant_id: string;
  token: string;
}

export interface ChapterPhase {
  chapter: number;
  step: 'inquiry' | 'awaiting_input' | 'generating' | 'review';
}

/** Parse "chapter_2:awaiting_input" style phases; null for lobby phases. */
export function chapterPhase(phase: string): ChapterPhase | null {
  const match = /^chapter_(\d):(inquiry|awaiting_input|generating|review)$/.exec(phase);
  if (!match) return null;
  return { chapter: Number(match[1]), step: match[2] as ChapterPhase['step'] };
}
