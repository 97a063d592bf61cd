/**
 * The session screens: scenario picker, role cards, character creation,
 * the chapter loop, and the final story view.
 *
 * All state is authoritative on the server. Every render derives from the
 * latest snapshot; there is no optimistic phase transition anywhere. In the
 * default single-device mode the tablet holds all three role tokens and the
 * on-screen role badge picks which participant is acting.
 */

import { ApiClient, ApiError } from './api';
import { deriveControls, type Controls } from './controls';
import { pollUntilTerminal } from './polling';
import { SketchPad } from './sketch';
import { speechAvailable, startDictation, type Dictation } from './voice';
import {
  ROLES,
  chapterPhase,
  type ClientSessionView,
  type RoleName,
  type ScenarioCard,
  type SegmentView,
} from './types';

const ROLE_LABELS: Record<RoleName, string> = {
  protagonist: 'Protagonist',
  opportunity: 'Opportunity',
  challenge: 'Challenge',
};

const ROLE_BLURBS: Record<RoleName, string> = {
  protagonist: 'names the goal and, at the end, the plan',
  opportunity: 'brings a lucky break into the story',
  challenge: 'raises the obstacle that tests the plan',
};

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export class App {
  readonly api: ApiClient;
  private readonly root: HTMLElement;

  view: ClientSessionView | null = null;
  activeRole: RoleName | null = null;
  tokens: Partial<Record<RoleName, string>> = {};
  scenarios: ScenarioCard[] = [];
  connectionLost = false;
  lastError: string | null = null;

  private sessionId: string | null = null;
  private sketch: SketchPad | null = null;
  private dictation: Dictation | null = null;
  private draftInput = '';
  private generationStartedAt: number | null = null;
  private elapsedTimer: ReturnType<typeof setInterval> | null = null;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(root: HTMLElement, api: ApiClient) {
    this.root = root;
    this.api = api;
  }

  // --- lifecycle -----------------------------------------------------------

  async start(sessionId?: string): Promise<void> {
    this.scenarios = await this.api.listScenarios();
    if (sessionId) {
      this.sessionId = sessionId;
      this.loadTokens();
      await this.refresh();
    } else {
      const view = await this.api.createSession();
      this.sessionId = view.id;
      this.view = view;
    }
    this.render();
  }

  get id(): string {
    if (this.sessionId === null) throw new Error('session not started');
    return this.sessionId;
  }

  async refresh(): Promise<void> {
    try {
      this.view = await this.api.getSession(this.id);
      if (this.connectionLost) {
        this.connectionLost = false; // resumed from the server snapshot
      }
      if (this.view.active_job_id === null && !chapterPhase(this.view.phase)) {
        this.generationStartedAt = null;
      }
    } catch (error) {
      if (error instanceof ApiError) throw error;
      // network failure: show the reconnect banner and retry
      this.connectionLost = true;
      this.scheduleReconnect();
    }
    this.render();
  }

  private scheduleReconnect(): void {
    if (this.reconnectTimer !== null) return;
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      void this.refresh();
    }, 1000);
  }

  private actionsInFlight = 0;

  /** True when no user action (including its trailing refresh) is running. */
  get idle(): boolean {
    return this.actionsInFlight === 0;
  }

  private async action(run: () => Promise<void>): Promise<void> {
    this.actionsInFlight += 1;
    this.lastError = null;
    try {
      await run();
    } catch (error) {
      this.lastError =
        error instanceof ApiError ? `${error.code}: ${error.message}` : String(error);
    } finally {
      try {
        await this.refresh();
      } finally {
        this.actionsInFlight -= 1;
      }
    }
  }

  // --- actions --------------------------------------------------------------

  async chooseScenario(scenarioId: string): Promise<void> {
    await this.action(async () => {
      this.view = await this.api.selectScenario(this.id, scenarioId);
    });
  }

  async seatParticipant(role: RoleName, name: string, facilitator = false): Promise<void> {
    await this.action(async () => {
      const joined = await this.api.addParticipant(this.id, name, facilitator);
      await this.api.assignRole(this.id, joined.participant_id, role);
      this.tokens[role] = joined.token;
      this.saveTokens();
    });
  }

  async uploadPhoto(file: Blob, mediaType: 'image/png' | 'image/jpeg'): Promise<void> {
    await this.action(async () => {
      await this.api.uploadCharacterSource(this.id, file, mediaType);
    });
  }

  async uploadSketch(): Promise<void> {
    if (this.sketch === null) return;
    const blob = await this.sketch.toPngBlob();
    await this.uploadPhoto(blob, 'image/png');
  }

  async generateAvatar(): Promise<void> {
    await this.action(async () => {
      const { job_id } = await this.api.startAvatarJob(this.id);
      this.beginGenerationClock();
      await this.refresh(); // show the progress state immediately
      const status = await pollUntilTerminal(() => this.api.getJob(job_id));
      if (status.state === 'failed' && status.error) {
        this.lastError = `${status.error.kind}: ${status.error.message}`;
      }
    });
  }

  async confirmCharacter(name: string): Promise<void> {
    await this.action(async () => {
      this.view = await this.api.confirmCharacter(this.id, name);
    });
  }

  async submitInput(text: string): Promise<void> {
    const view = this.view;
    const phase = view ? chapterPhase(view.phase) : null;
    const token = this.activeRole ? this.tokens[this.activeRole] : undefined;
    if (!view || !phase || !token) return;
    await this.action(async () => {
      const { job_id } = await this.api.submitChapterInput(
        this.id, phase.chapter, text, token,
      );
      this.draftInput = '';
      this.beginGenerationClock();
      await this.refresh();
      const status = await pollUntilTerminal(() => this.api.getJob(job_id));
      if (status.state === 'failed' && status.error) {
        this.lastError = `${status.error.kind}: ${status.error.message}`;
      }
    });
  }

  async acceptChapter(): Promise<void> {
    const phase = this.view ? chapterPhase(this.view.phase) : null;
    const token = this.activeRole ? this.tokens[this.activeRole] : undefined;
    if (!phase || !token) return;
    await this.action(async () => {
      this.view = await this.api.acceptSegment(this.id, phase.chapter, token);
    });
  }

  async regenerateChapter(): Promise<void> {
    const phase = this.view ? chapterPhase(this.view.phase) : null;
    const token = this.activeRole ? this.tokens[this.activeRole] : undefined;
    if (!phase || !token) return;
    await this.action(async () => {
      const { job_id } = await this.api.regenerateSegment(this.id, phase.chapter, token);
      this.beginGenerationClock();
      await this.refresh();
      await pollUntilTerminal(() => this.api.getJob(job_id));
    });
  }

  setActiveRole(role: RoleName): void {
    this.activeRole = role;
    this.render();
  }

  // --- token persistence (single-device resume after a reload) ---------------

  private tokenStorageKey(): string {
    return `storytriad:${this.id}:tokens`;
  }

  private saveTokens(): void {
    try {
      localStorage.setItem(this.tokenStorageKey(), JSON.stringify(this.tokens));
    } catch {
      // storage may be unavailable (private mode); tokens then live in memory
    }
  }

  private loadTokens(): void {
    try {
      const raw = localStorage.getItem(this.tokenStorageKey());
      if (raw) this.tokens = JSON.parse(raw);
    } catch {
      this.tokens = {};
    }
  }

  // --- generation clock -------------------------------------------------------

  private beginGenerationClock(): void {
    this.generationStartedAt = Date.now();
    if (this.elapsedTimer === null) {
      this.elapsedTimer = setInterval(() => {
        const span = this.root.querySelector('#elapsed');
        if (span && this.generationStartedAt !== null) {
          const seconds = Math.floor((Date.now() - this.generationStartedAt) / 1000);
          span.textContent = `${seconds}s`;
        }
      }, 500);
    }
  }

  private stopGenerationClock(): void {
    if (this.elapsedTimer !== null) {
      clearInterval(this.elapsedTimer);
      this.elapsedTimer = null;
    }
  }

  // --- rendering ----------------------------------------------------------------

  controls(): Controls {
    return deriveControls(this.view, this.activeRole);
  }

  render(): void {
    const controls = this.controls();
    if (!controls.generating) this.stopGenerationClock();
    const banner = this.connectionLost
      ? '<div class="banner reconnect" id="reconnect-banner">Connection lost — reconnecting…</div>'
      : '';
    const errorLine = this.lastError
      ? `<div class="banner error" id="error-line">${escapeHtml(this.lastError)}</div>`
      : '';
    let body = '';
    switch (controls.screen) {
      case 'connecting':
        body = '<p>Loading session…</p>';
        break;
      case 'scenario':
        body = this.renderScenarioPicker();
        break;
      case 'roles':
        body = this.renderRoleAssignment();
        break;
      case 'character':
        body = this.renderCharacterCreation(controls);
        break;
      case 'chapter':
        body = this.renderChapter(controls);
        break;
      case 'presentation':
        body = this.renderPresentation();
        break;
    }
    this.root.innerHTML = `${banner}${errorLine}${body}`;
    this.wire(controls);
  }

  private renderScenarioPicker(): string {
    const cards = this.scenarios
      .map(
        (scenario) => `
        <button class="card scenario-card" data-scenario="${scenario.id}">
          <h3>${escapeHtml(scenario.title)}</h3>
          <p>${escapeHtml(scenario.setting_description)}</p>
        </button>`,
      )
      .join('');
    return `<section id="scenario-picker"><h2>Choose your future</h2>
      <div class="cards">${cards}</div></section>`;
  }

  private renderRoleAssignment(): string {
    const taken = new Map(
      (this.view?.participants ?? [])
        .filter((p) => p.role !== null)
        .map((p) => [p.role as RoleName, p.display_name]),
    );
    const cards = ROLES.map((role) => {
      const holder = taken.get(role);
      const inner = holder
        ? `<p class="holder">${escapeHtml(holder)}</p>`
        : `<input type="text" placeholder="your name" data-name-for="${role}">
           <button data-take-role="${role}">Take this role</button>`;
      return `<div class="card role-card" data-role-card="${role}">
        <h3>${ROLE_LABELS[role]}</h3><p>${ROLE_BLURBS[role]}</p>${inner}</div>`;
    }).join('');
    return `<section id="role-assignment"><h2>Who plays what?</h2>
      <div class="cards">${cards}</div></section>`;
  }

  private renderCharacterCreation(controls: Controls): string {
    const character = this.view?.character ?? null;
    const avatar = character?.avatar
      ? `<img id="avatar-preview" alt="avatar preview"
             src="${this.api.imageUrl(character.avatar.content_address)}">`
      : '<p id="avatar-preview-empty">No avatar yet.</p>';
    const progress = controls.avatarGeneratable
      ? ''
      : this.view?.active_job_id
        ? `<p class="progress">Stylizing… <span id="elapsed"></span></p>`
        : '';
    return `<section id="character-creation"><h2>Create your protagonist</h2>
      <div class="columns">
        <div>
          <h3>Photo</h3>
          <input type="file" id="photo-input" accept="image/png,image/jpeg"
                 ${controls.sourceUploadable ? '' : 'disabled'}>
          <h3>…or sketch</h3>
          <canvas id="sketch-canvas"></canvas>
          <div>
            <button id="sketch-clear">Clear</button>
            <button id="sketch-use" ${controls.sourceUploadable ? '' : 'disabled'}>
              Use sketch</button>
          </div>
        </div>
        <div>
          <h3>Avatar</h3>
          ${avatar}
          ${progress}
          <button id="avatar-generate" ${controls.avatarGeneratable ? '' : 'disabled'}>
            ${character?.avatar ? 'Re-roll avatar' : 'Generate avatar'}</button>
          <h3>Name</h3>
          <input type="text" id="character-name" maxlength="40" placeholder="protagonist name">
          <button id="character-confirm" ${controls.confirmable ? '' : 'disabled'}>
            Everyone agrees — confirm</button>
        </div>
      </div></section>`;
  }

  private renderRoleBadges(): string {
    const current = this.view?.current_turn ?? null;
    const badges = ROLES.map((role) => {
      const active = this.activeRole === role ? 'active' : '';
      // the turn marker comes from the server snapshot, never computed here
      const turn = current === role ? '<span class="turn-marker">turn</span>' : '';
      return `<button class="role-badge ${active}" data-badge="${role}">
        ${ROLE_LABELS[role]} ${turn}</button>`;
    }).join('');
    return `<div id="role-badges">${badges}</div>`;
  }

  private renderChapter(controls: Controls): string {
    const view = this.view!;
    const phase = chapterPhase(view.phase)!;
    const header = `<header><h2>Chapter ${phase.chapter} of 4</h2>
      <div class="progress-dots">${'●'.repeat(phase.chapter)}${'○'.repeat(4 - phase.chapter)}</div>
      </header>`;

    if (controls.generating) {
      return `${header}<section id="generation-progress">
        <p>The story is being written and illustrated…</p>
        <p class="progress">elapsed: <span id="elapsed">0s</span></p>
        </section>`;
    }
    if (controls.reviewing) {
      const segment = view.segments[String(phase.chapter)];
      return `${header}${this.renderRoleBadges()}
        <section id="chapter-review">${this.renderSegment(segment)}
        <div class="review-actions">
          <button id="accept-button" ${controls.acceptEnabled ? '' : 'disabled'}>Accept</button>
          <button id="regenerate-button" ${controls.regenerateEnabled ? '' : 'disabled'}>
            Regenerate</button>
        </div></section>`;
    }
    const inquiry = view.inquiry ?? '…';
    const mic = speechAvailable()
      ? '<button id="voice-button" title="dictate">🎤</button>'
      : '';
    const turnNote =
      view.current_turn && this.activeRole !== view.current_turn
        ? `<p class="turn-note" id="turn-note">It is the
             ${ROLE_LABELS[view.current_turn]} player's turn — pass the tablet
             or tap their badge.</p>`
        : '';
    return `${header}${this.renderRoleBadges()}
      <section id="chapter-input">
        <div class="inquiry-banner" id="inquiry-banner">${escapeHtml(inquiry)}</div>
        ${turnNote}
        <textarea id="player-input" rows="3" maxlength="1000"
          placeholder="type the answer here"
          ${controls.inputEnabled ? '' : 'disabled'}>${escapeHtml(this.draftInput)}</textarea>
        <div>
          ${mic}
          <button id="submit-input" disabled>Send to the storyteller</button>
        </div>
      </section>`;
  }

  private renderSegment(segment: SegmentView | undefined): string {
    if (!segment) return '<p>(missing segment)</p>';
    const scenes = segment.paragraphs
      .map((paragraph, i) => {
        const ref = segment.illustrations[i];
        const img = ref
          ? `<img src="${this.api.imageUrl(ref.content_address)}" alt="illustration ${i + 1}">`
          : '';
        return `<div class="scene">${img}<p>${escapeHtml(paragraph)}</p></div>`;
      })
      .join('');
    return `<div class="segment">${scenes}</div>`;
  }

  private renderPresentation(): string {
    const view = this.view!;
    const chapters = Object.keys(view.segments)
      .map(Number)
      .sort((a, b) => a - b)
      .map((index) => {
        const segment = view.segments[String(index)];
        return `<section class="chapter-block">
          <h3>Chapter ${index}</h3>${this.renderSegment(segment)}</section>`;
      })
      .join('');
    const avatar = view.character?.avatar
      ? `<img class="avatar" src="${this.api.imageUrl(view.character.avatar.content_address)}"
             alt="avatar">`
      : '';
    return `<section id="presentation">
      <header>${avatar}<h2>${escapeHtml(view.character?.name ?? '')} —
        ${escapeHtml(view.scenario?.title ?? '')}</h2></header>
      ${chapters}
      <div class="export-actions">
        <a id="export-json" href="${this.api.exportUrl(this.id, 'json')}" download>
          Export JSON</a>
        <a id="export-html" href="${this.api.exportUrl(this.id, 'html')}" download>
          Export story page</a>
      </div></section>`;
  }

  // --- event wiring ----------------------------------------------------------------

  private wire(controls: Controls): void {
    this.root.querySelectorAll<HTMLButtonElement>('[data-scenario]').forEach((button) => {
      button.addEventListener('click', () => {
        void this.chooseScenario(button.dataset.scenario!);
      });
    });

    this.root.querySelectorAll<HTMLButtonElement>('[data-take-role]').forEach((button) => {
      button.addEventListener('click', () => {
        const role = button.dataset.takeRole as RoleName;
        const input = this.root.querySelector<HTMLInputElement>(
          `[data-name-for="${role}"]`,
        );
        const name = input?.value.trim();
        if (name) void this.seatParticipant(role, name);
      });
    });

    const photo = this.root.querySelector<HTMLInputElement>('#photo-input');
    photo?.addEventListener('change', () => {
      const file = photo.files?.[0];
      if (!file) return;
      const media = file.type === 'image/jpeg' ? 'image/jpeg' : 'image/png';
      void this.uploadPhoto(file, media);
    });

    const canvas = this.root.querySelector<HTMLCanvasElement>('#sketch-canvas');
    if (canvas) this.sketch = new SketchPad(canvas);
    this.root
      .querySelector('#sketch-clear')
      ?.addEventListener('click', () => this.sketch?.clear());
    this.root
      .querySelector('#sketch-use')
      ?.addEventListener('click', () => void this.uploadSketch());
    this.root
      .querySelector('#avatar-generate')
      ?.addEventListener('click', () => void this.generateAvatar());
    this.root.querySelector('#character-confirm')?.addEventListener('click', () => {
      const name = this.root.querySelector<HTMLInputElement>('#character-name')?.value ?? '';
      if (name.trim()) void this.confirmCharacter(name.trim());
    });

    this.root.querySelectorAll<HTMLButtonElement>('[data-badge]').forEach((button) => {
      button.addEventListener('click', () => {
        this.setActiveRole(button.dataset.badge as RoleName);
      });
    });

    const textarea = this.root.querySelector<HTMLTextAreaElement>('#player-input');
    const submit = this.root.querySelector<HTMLButtonElement>('#submit-input');
    if (textarea && submit) {
      const sync = () => {
        this.draftInput = textarea.value;
        submit.disabled = !(controls.inputEnabled && textarea.value.trim().length > 0);
      };
      textarea.addEventListener('input', sync);
      sync();
      submit.addEventListener('click', () => {
        const text = textarea.value.trim();
        if (text) void this.submitInput(text);
      });
    }

    this.root.querySelector('#voice-button')?.addEventListener('click', () => {
      if (this.dictation) {
        this.dictation.stop();
        this.dictation = null;
        return;
      }
      this.dictation = startDictation(
        (text) => {
          const field = this.root.querySelector<HTMLTextAreaElement>('#player-input');
          if (field && !field.disabled) {
            field.value = text; // editable before submit
            field.dispatchEvent(new Event('input'));
          }
        },
        () => {
          this.dictation = null;
        },
      );
    });

    this.root
      .querySelector('#accept-button')
      ?.addEventListener('click', () => void this.acceptChapter());
    this.root
      .querySelector('#regenerate-button')
      ?.addEventListener('click', () => void this.regenerateChapter());
  }
}
