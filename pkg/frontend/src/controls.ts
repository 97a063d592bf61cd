/**
 * Control enablement, derived purely from the server snapshot.
 *
 * The one rule that matters most: the chapter input is enabled only when the
 * server says it is this role's turn. The client never infers the turn from
 * the chapter number; `view.current_turn` is the single source of truth, so
 * a mutating request the current phase forbids is never even offered.
 */

import { chapterPhase, type ClientSessionView, type RoleName } from './types';

export interface Controls {
  screen:
    | 'connecting'
    | 'scenario'
    | 'roles'
    | 'character'
    | 'chapter'
    | 'presentation';
  scenarioSelectable: boolean;
  rolesAssignable: boolean;
  sourceUploadable: boolean;
  avatarGeneratable: boolean;
  confirmable: boolean;
  chapter: number | null;
  generating: boolean;
  reviewing: boolean;
  inputEnabled: boolean;
  acceptEnabled: boolean;
  regenerateEnabled: boolean;
  exportEnabled: boolean;
}

const DISABLED: Omit<Controls, 'screen'> = {
  scenarioSelectable: false,
  rolesAssignable: false,
  sourceUploadable: false,
  avatarGeneratable: false,
  confirmable: false,
  chapter: null,
  generating: false,
  reviewing: false,
  inputEnabled: false,
  acceptEnabled: false,
  regenerateEnabled: false,
  exportEnabled: false,
};

export function deriveControls(
  view: ClientSessionView | null,
  activeRole: RoleName | null,
): Controls {
  if (view === null) {
    return { screen: 'connecting', ...DISABLED };
  }
  const busy = view.active_job_id !== null;

  if (view.phase === 'setup') {
    return { screen: 'scenario', ...DISABLED, scenarioSelectable: true };
  }
  if (view.phase === 'role_assignment') {
    return { screen: 'roles', ...DISABLED, rolesAssignable: true };
  }
  if (view.phase === 'character_construction') {
    const character = view.character;
    return {
      screen: 'character',
      ...DISABLED,
      sourceUploadable: !busy,
      avatarGeneratable: !busy && character?.source_image != null,
      confirmable: !busy && character?.avatar != null,
    };
  }
  const inChapter = chapterPhase(view.phase);
  if (inChapter !== null) {
    const myTurn =
      view.current_turn !== null && activeRole !== null && activeRole === view.current_turn;
    return {
      screen: 'chapter',
      ...DISABLED,
      chapter: inChapter.chapter,
      generating: inChapter.step === 'generating' || busy,
      reviewing: inChapter.step === 'review',
      inputEnabled: inChapter.step === 'awaiting_input' && !busy && myTurn,
      acceptEnabled: inChapter.step === 'review' && !busy && activeRole !== null,
      regenerateEnabled: inChapter.step === 'review' && !busy && activeRole !== null,
    };
  }
  // presentation and closed both show the finished story
  return { screen: 'presentation', ...DISABLED, exportEnabled: true };
}
