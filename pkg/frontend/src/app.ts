import {
  ApiError,
  createSession,
  getSession,
  listOpportunities,
  sendAnswer,
} from "./api.js";
import type { SessionView } from "./api.js";
import { createStore, initialState } from "./store.js";
import type { AppState, Store, TranscriptTurn } from "./store.js";

// The service API exposes no turn history, so the transcript panel is cached
// locally per browser; session state itself is always re-read from the service.
const STORAGE_KEY = "askless.session";

interface SavedSession {
  sessionId: string;
  transcript: TranscriptTurn[];
}

function loadSaved(): SavedSession | null {
  const raw = localStorage.getItem(STORAGE_KEY);
  if (!raw) return null;
  try {
    const parsed = JSON.parse(raw);
    if (typeof parsed.sessionId === "string" && Array.isArray(parsed.transcript)) {
      return parsed as SavedSession;
    }
  } catch {
    // corrupt cache; treat as absent
  }
  return null;
}

function saveSession(sessionId: string, transcript: TranscriptTurn[]): void {
  localStorage.setItem(STORAGE_KEY, JSON.stringify({ sessionId, transcript }));
}

function clearSaved(): void {
  localStorage.removeItem(STORAGE_KEY);
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  return "Could not reach the service. Check the connection and retry.";
}

function phaseFor(session: SessionView): AppState["phase"] {
  return session.state === "concluded" ? "summary" : "chat";
}

export interface App {
  store: Store;
  init(): Promise<void>;
  /** Resolves once the most recent user action has settled; used by tests. */
  idle(): Promise<void>;
}

export function createApp(root: HTMLElement): App {
  const store = createStore(initialState());
  let retryAction: (() => Promise<void>) | null = null;
  let inflight: Promise<void> = Promise.resolve();

  function guard(action: () => Promise<void>): Promise<void> {
    if (store.get().busy) return inflight;
    const run = (async () => {
      store.set({ busy: true, error: null, canRetry: false });
      try {
        await action();
        retryAction = null;
        store.set({ busy: false });
      } catch (err) {
        const retryable = !(err instanceof ApiError);
        retryAction = retryable ? action : null;
        store.set({ busy: false, error: describeError(err), canRetry: retryable });
      }
    })();
    inflight = run;
    return run;
  }

  async function loadPicker(): Promise<void> {
    const opportunities = await listOpportunities();
    store.set({
      phase: "picker",
      opportunities,
      selected: [],
      session: null,
      transcript: [],
    });
  }

  async function start(): Promise<void> {
    const session = await createSession(store.get().selected);
    saveSession(session.session_id, []);
    store.set({ session, transcript: [], phase: phaseFor(session) });
  }

  async function submit(answer: string): Promise<void> {
    const current = store.get().session;
    if (!current || current.state !== "awaiting_answer" || !current.current_question) {
      return;
    }
    const question = current.current_question;
    let session: SessionView;
    try {
      session = await sendAnswer(current.session_id, answer);
    } catch (err) {
      if (err instanceof ApiError && err.code === "session_concluded") {
        // Another tab finished the interview; show its outcome.
        session = await getSession(current.session_id);
        store.set({ session, phase: phaseFor(session) });
        return;
      }
      throw err;
    }
    const transcript = [...store.get().transcript, { question, answer }];
    saveSession(session.session_id, transcript);
    store.set({ session, transcript, phase: phaseFor(session) });
  }

  async function restore(saved: SavedSession): Promise<void> {
    let session: SessionView;
    try {
      session = await getSession(saved.sessionId);
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        clearSaved();
        await loadPicker();
        return;
      }
      throw err;
    }
    const opportunities = await listOpportunities();
    store.set({
      phase: phaseFor(session),
      opportunities,
      session,
      transcript: saved.transcript,
    });
  }

  async function reset(): Promise<void> {
    clearSaved();
    await loadPicker();
  }

  const container = document.createElement("div");
  container.className = "screener";

  const header = document.createElement("header");
  const heading = document.createElement("h1");
  heading.textContent = "Eligibility screener";
  header.appendChild(heading);

  const banner = document.createElement("div");
  banner.className = "error-banner";

  const main = document.createElement("main");

  container.append(header, banner, main);
  root.appendChild(container);

  function syncBanner(state: AppState): void {
    banner.innerHTML = "";
    banner.hidden = state.error === null;
    if (state.error === null) return;
    const message = document.createElement("span");
    message.textContent = state.error;
    banner.appendChild(message);
    if (state.canRetry && retryAction !== null) {
      const retry = document.createElement("button");
      retry.className = "retry";
      retry.textContent = "Retry";
      retry.addEventListener("click", () => {
        const action = retryAction;
        if (action) void guard(action);
      });
      banner.appendChild(retry);
    }
  }

  function renderPicker(state: AppState): void {
    const lead = document.createElement("p");
    lead.className = "lead";
    lead.textContent = "Pick the programs you would like to be screened for.";
    main.appendChild(lead);

    const list = document.createElement("ul");
    list.className = "opportunity-list";
    for (const opportunity of state.opportunities) {
      const item = document.createElement("li");
      const label = document.createElement("label");
      const box = document.createElement("input");
      box.type = "checkbox";
      box.value = opportunity.opportunity_id;
      box.checked = state.selected.includes(opportunity.opportunity_id);
      box.addEventListener("change", () => {
        const selected = store.get().selected.filter((oid) => oid !== box.value);
        if (box.checked) selected.push(box.value);
        store.set({ selected });
      });
      const title = document.createElement("strong");
      title.textContent = opportunity.title;
      label.append(box, " ", title);
      const details = document.createElement("details");
      const summary = document.createElement("summary");
      summary.textContent = "Requirements";
      const text = document.createElement("pre");
      text.textContent = opportunity.requirements;
      details.append(summary, text);
      item.append(label, details);
      list.appendChild(item);
    }
    main.appendChild(list);

    const startButton = document.createElement("button");
    startButton.className = "start";
    startButton.textContent = "Start screening";
    startButton.disabled = state.selected.length === 0 || state.busy;
    startButton.addEventListener("click", () => void guard(start));
    main.appendChild(startButton);
  }

  function renderTranscript(state: AppState): void {
    const list = document.createElement("ol");
    list.className = "transcript";
    for (const turn of state.transcript) {
      const item = document.createElement("li");
      item.className = "turn";
      const question = document.createElement("p");
      question.className = "question";
      question.textContent = turn.question;
      const answer = document.createElement("p");
      answer.className = "answer";
      answer.textContent = turn.answer;
      item.append(question, answer);
      list.appendChild(item);
    }
    main.appendChild(list);
  }

  function renderChat(state: AppState): void {
    const session = state.session;
    if (!session) return;

    const progress = document.createElement("p");
    progress.className = "progress-line";
    progress.textContent = `Turn ${session.turns_used} of ${session.max_turns}`;
    const meter = document.createElement("progress");
    meter.max = session.max_turns;
    meter.value = session.turns_used;
    main.append(progress, meter);

    renderTranscript(state);

    const current = document.createElement("p");
    current.className = "question current";
    current.textContent = session.current_question ?? "";
    main.appendChild(current);

    const form = document.createElement("form");
    form.className = "answer-form";
    const input = document.createElement("input");
    input.name = "answer";
    input.autocomplete = "off";
    input.disabled = state.busy;
    const send = document.createElement("button");
    send.type = "submit";
    send.textContent = "Send";
    send.disabled = state.busy;
    form.append(input, send);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const answer = input.value.trim();
      if (answer === "" || store.get().busy) return;
      void guard(() => submit(answer));
    });
    main.appendChild(form);
    input.focus();
  }

  function renderSummary(state: AppState): void {
    const session = state.session;
    if (!session) return;

    const lead = document.createElement("p");
    lead.className = "lead";
    lead.textContent = `Screening complete after ${session.turns_used} turn(s).`;
    main.appendChild(lead);

    if (session.fallback_warning) {
      const warning = document.createElement("p");
      warning.className = "fallback-warning";
      warning.textContent =
        "The interview ran out of turns; decisions marked predicted were " +
        "inferred from the conversation instead of your answers.";
      main.appendChild(warning);
    }

    renderTranscript(state);

    const titles = new Map(
      state.opportunities.map((opp) => [opp.opportunity_id, opp.title]),
    );
    const cards = document.createElement("section");
    cards.className = "decisions";
    for (const [oid, decision] of Object.entries(session.decisions ?? {})) {
      const card = document.createElement("article");
      card.className = "decision-card";
      card.dataset.opportunity = oid;
      const name = document.createElement("h2");
      name.textContent = titles.get(oid) ?? oid;
      const verdict = document.createElement("p");
      verdict.className = decision.eligible ? "verdict eligible" : "verdict ineligible";
      verdict.textContent =
        (decision.eligible ? "Eligible" : "Not eligible") +
        (decision.predicted ? " (predicted)" : "");
      const rationale = document.createElement("ul");
      rationale.className = "rationale";
      for (const line of decision.rationale) {
        const entry = document.createElement("li");
        entry.textContent = line;
        rationale.appendChild(entry);
      }
      card.append(name, verdict, rationale);
      cards.appendChild(card);
    }
    main.appendChild(cards);

    const startOver = document.createElement("button");
    startOver.className = "start-over";
    startOver.textContent = "Start over";
    startOver.addEventListener("click", () => void guard(reset));
    main.appendChild(startOver);
  }

  function sync(): void {
    const state = store.get();
    syncBanner(state);
    main.innerHTML = "";
    switch (state.phase) {
      case "loading": {
        const note = document.createElement("p");
        note.textContent = "Loading…";
        main.appendChild(note);
        break;
      }
      case "picker":
        renderPicker(state);
        break;
      case "chat":
        renderChat(state);
        break;
      case "summary":
        renderSummary(state);
        break;
    }
  }

  sync();
  store.subscribe(sync);

  return {
    store,
    init() {
      const saved = loadSaved();
      return guard(saved ? () => restore(saved) : loadPicker);
    },
    idle: () => inflight,
  };
}
