/** Typed client for the session service HTTP API. */

import type {
  ClientSessionView,
  JobStatus,
  JoinResult,
  RoleName,
  ScenarioCard,
} from './types';

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly phase: string | null;

  constructor(status: number, code: string, message: string, phase: string | null) {
    super(message);
    this.status = status;
    this.code = code;
    this.phase = phase;
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let code = 'HttpError';
  let message = `${response.status} ${response.statusText}`;
  let phase: string | null = null;
  try {
    const body = await response.json();
    if (body && typeof body.code === 'string') {
      code = body.code;
      message = body.message ?? message;
      phase = body.phase ?? null;
    }
  } catch {
    // non-JSON error body; keep the HTTP status text
  }
  return new ApiError(response.status, code, message, phase);
}

export class ApiClient {
  readonly baseUrl: string;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/$/, '');
  }

  private async request<T>(
    method: string,
    path: string,
    options: { json?: unknown; body?: BodyInit; headers?: Record<string, string> } = {},
  ): Promise<T> {
    const headers: Record<string, string> = { ...options.headers };
    let body = options.body;
    if (options.json !== undefined) {
      headers['Content-Type'] = 'application/json';
      body = JSON.stringify(options.json);
    }
    const response = await fetch(this.baseUrl + path, { method, headers, body });
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  listScenarios(): Promise<ScenarioCard[]> {
    return this.request('GET', '/scenarios');
  }

  createSession(sessionId?: string): Promise<ClientSessionView> {
    return this.request('POST', '/sessions', {
      json: sessionId ? { session_id: sessionId } : {},
    });
  }

  getSession(sessionId: string): Promise<ClientSessionView> {
    return this.request('GET', `/sessions/${sessionId}`);
  }

  selectScenario(sessionId: string, scenarioId: string): Promise<ClientSessionView> {
    return this.request('POST', `/sessions/${sessionId}/scenario`, {
      json: { scenario_id: scenarioId },
    });
  }

  addParticipant(
    sessionId: string,
    displayName: string,
    isFacilitator = false,
  ): Promise<JoinResult> {
    return this.request('POST', `/sessions/${sessionId}/participants`, {
      json: { display_name: displayName, is_facilitator: isFacilitator },
    });
  }

  assignRole(
    sessionId: string,
    participantId: string,
    role: RoleName,
  ): Promise<ClientSessionView> {
    return this.request('POST', `/sessions/${sessionId}/roles`, {
      json: { participant_id: participantId, role },
    });
  }

  async uploadCharacterSource(
    sessionId: string,
    image: Blob,
    mediaType: 'image/png' | 'image/jpeg',
  ): Promise<void> {
    // raw bytes rather than the Blob: identical on the wire, and it keeps
    // the client independent of the host's particular Blob implementation
    const bytes = await image.arrayBuffer();
    await this.request('POST', `/sessions/${sessionId}/character/source`, {
      body: bytes,
      headers: { 'Content-Type': mediaType },
    });
  }

  startAvatarJob(sessionId: string): Promise<{ job_id: string }> {
    return this.request('POST', `/sessions/${sessionId}/character/avatar`, { json: {} });
  }

  confirmCharacter(sessionId: string, name: string): Promise<ClientSessionView> {
    return this.request('POST', `/sessions/${sessionId}/character/confirm`, {
      json: { name },
    });
  }

  submitChapterInput(
    sessionId: string,
    chapter: number,
    text: string,
    token: string,
  ): Promise<{ job_id: string }> {
    return this.request('POST', `/sessions/${sessionId}/chapters/${chapter}/input`, {
      json: { text },
      headers: { 'X-Participant-Token': token },
    });
  }

  acceptSegment(
    sessionId: string,
    chapter: number,
    token: string,
  ): Promise<ClientSessionView> {
    return this.request('POST', `/sessions/${sessionId}/chapters/${chapter}/accept`, {
      json: {},
      headers: { 'X-Participant-Token': token },
    });
  }

  regenerateSegment(
    sessionId: string,
    chapter: number,
    token: string,
  ): Promise<{ job_id: string }> {
    return this.request('POST', `/sessions/${sessionId}/chapters/${chapter}/regenerate`, {
      json: {},
      headers: { 'X-Participant-Token': token },
    });
  }

  getJob(jobId: string): Promise<JobStatus> {
    return this.request('GET', `/jobs/${jobId}`);
  }

  imageUrl(contentAddress: string): string {
    return `${this.baseUrl}/images/${contentAddress}`;
  }

  exportUrl(sessionId: string, format: 'json' | 'html'): string {
    return `${this.baseUrl}/sessions/${sessionId}/export?format=${format}`;
  }
}
