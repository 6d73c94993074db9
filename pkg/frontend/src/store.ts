import type { Opportunity, SessionView } from "./api.js";

/** One answered question, in the order the interview asked them. */
export interface TranscriptTurn {
  question: string;
  answer: string;
}

export type Phase = "loading" | "picker" | "chat" | "summary";

export interface AppState {
  phase: Phase;
  opportunities: Opportunity[];
  selected: string[];
  /** Last session payload exactly as the service returned it. */
  session: SessionView | null;
  transcript: TranscriptTurn[];
  /** A request is in flight; inputs are disabled until it settles. */
  busy: boolean;
  /** Message shown in the error banner, with a retry button when retryable. */
  error: string | null;
  canRetry: boolean;
}

export function initialState(): AppState {
  return {
    phase: "loading",
    opportunities: [],
    selected: [],
    session: null,
    transcript: [],
    busy: false,
    error: null,
    canRetry: false,
  };
}

type Listener = () => void;

export interface Store {
  get(): AppState;
  set(patch: Partial<AppState>): void;
  subscribe(listener: Listener): void;
}

export function createStore(initial: AppState = initialState()): Store {
  let state = initial;
  const listeners: Listener[] = [];
  return {
    get: () => state,
    set(patch) {
      state = { ...state, ...patch };
      for (const listener of listeners) listener();
    },
    subscribe(listener) {
      listeners.push(listener);
    },
  };
}
