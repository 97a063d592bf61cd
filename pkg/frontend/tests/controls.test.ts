import { describe, expect, it } from 'vitest';

import { deriveControls } from '../src/controls';
import type { ClientSessionView, RoleName } from '../src/types';

function view(overrides: Partial<ClientSessionView> = {}): ClientSessionView {
  return {
    id: 's',
    phase: 'setup',
    scenario: null,
    participants: [],
    character: null,
    segments: {},
    current_turn: null,
    inquiry: null,
    active_job_id: null,
    regen_counts: {},
    created_at: 0,
    updated_at: 0,
    ...overrides,
  };
}

describe('deriveControls', () => {
  it('shows the connecting screen without a snapshot', () => {
    expect(deriveControls(null, null).screen).toBe('connecting');
  });

  it('maps lobby phases to their screens', () => {
    expect(deriveControls(view(), null).screen).toBe('scenario');
    expect(deriveControls(view({ phase: 'role_assignment' }), null).screen).toBe('roles');
    expect(deriveControls(view({ phase: 'character_construction' }), null).screen).toBe(
      'character',
    );
    expect(deriveControls(view({ phase: 'presentation' }), null).screen).toBe(
      'presentation',
    );
    expect(deriveControls(view({ phase: 'closed' }), null).screen).toBe('presentation');
  });

  it('enables input only when the active role matches the server turn', () => {
    const awaiting = view({ phase: 'chapter_2:awaiting_input', current_turn: 'opportunity' });
    for (const role of ['protagonist', 'opportunity', 'challenge'] as RoleName[]) {
      const controls = deriveControls(awaiting, role);
      expect(controls.inputEnabled).toBe(role === 'opportunity');
    }
    expect(deriveControls(awaiting, null).inputEnabled).toBe(false);
  });

  it('never enables input from a locally inferred turn', () => {
    // server says nobody's turn (e.g. stale snapshot): input must stay off
    const stale = view({ phase: 'chapter_1:awaiting_input', current_turn: null });
    expect(deriveControls(stale, 'protagonist').inputEnabled).toBe(false);
  });

  it('disables input during generation and review', () => {
    const generating = view({ phase: 'chapter_1:generating' });
    expect(deriveControls(generating, 'protagonist').inputEnabled).toBe(false);
    expect(deriveControls(generating, 'protagonist').generating).toBe(true);
    const review = view({ phase: 'chapter_1:review' });
    const controls = deriveControls(review, 'challenge');
    expect(controls.inputEnabled).toBe(false);
    expect(controls.acceptEnabled).toBe(true);
    expect(controls.regenerateEnabled).toBe(true);
  });

  it('treats an active job as busy regardless of phase text', () => {
    const busy = view({
      phase: 'chapter_3:awaiting_input',
      current_turn: 'challenge',
      active_job_id: 'j1',
    });
    const controls = deriveControls(busy, 'challenge');
    expect(controls.inputEnabled).toBe(false);
    expect(controls.generating).toBe(true);
  });

  it('gates character actions on uploaded source and avatar', () => {
    const bare = view({ phase: 'character_construction' });
    expect(deriveControls(bare, null).avatarGeneratable).toBe(false);
    expect(deriveControls(bare, null).confirmable).toBe(false);
    const withSource = view({
      phase: 'character_construction',
      character: {
        name: '',
        source_image: { content_address: 'a'.repeat(64), media_type: 'png', width: 1, height: 1 },
        avatar: null,
        style_tokens: 's',
        confirmed: false,
      },
    });
    expect(deriveControls(withSource, null).avatarGeneratable).toBe(true);
    expect(deriveControls(withSource, null).confirmable).toBe(false);
  });

  it('review actions require some active role (any role-holder may accept)', () => {
    const review = view({ phase: 'chapter_4:review' });
    expect(deriveControls(review, null).acceptEnabled).toBe(false);
    expect(deriveControls(review, 'opportunity').acceptEnabled).toBe(true);
  });
});
