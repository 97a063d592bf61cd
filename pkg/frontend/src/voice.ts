/**
 * Dictation via the browser SpeechRecognition API. The transcription lands
 * in the text input as editable text; the server only ever receives text.
 * Browsers without the capability simply never show the voice button.
 */

interface RecognitionLike {
  lang: string;
  interimResults: boolean;
  start(): void;
  stop(): void;
  onresult: ((event: any) => void) | null;
  onend: (() => void) | null;
  onerror: ((event: any) => void) | null;
}

function recognitionConstructor(scope: any): (new () => RecognitionLike) | null {
  return scope.SpeechRecognition ?? scope.webkitSpeechRecognition ?? null;
}

export function speechAvailable(scope: unknown = globalThis): boolean {
  return recognitionConstructor(scope) !== null;
}

export interface Dictation {
  stop(): void;
}

export function startDictation(
  onText: (text: string) => void,
  onEnd: () => void,
  scope: unknown = globalThis,
): Dictation | null {
  const ctor = recognitionConstructor(scope);
  if (ctor === null) return null;
  const recognition = new ctor();
  recognition.lang = (globalThis as any).navigator?.language ?? 'en-US';
  recognition.interimResults = false;
  recognition.onresult = (event: any) => {
    const pieces: string[] = [];
    for (const result of event.results ?? []) {
      if (result[0]?.transcript) pieces.push(result[0].transcript);
    }
    const text = pieces.join(' ').trim();
    if (text) onText(text);
  };
  recognition.onend = onEnd;
  recognition.onerror = onEnd;
  recognition.start();
  return { stop: () => recognition.stop() };
}
