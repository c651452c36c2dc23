/**
 * Operator console view-model.
 *
 * Holds everything the UI renders and nothing the server owns: view state
 * derives only from StateSnapshot/event frames received over the session
 * event stream. There is no client-side scene simulation — submitting an
 * utterance changes badges only once the server's snapshot frame arrives.
 */

export interface EventFrame {
  seq: number;
  kind: string;
  payload: Record<string, any>;
}

export interface SceneSnapshot {
  visible: Record<string, boolean>;
  frozen: boolean;
  marker_tracking: boolean;
  ct_panel_open: boolean;
  patient_panel_open: boolean;
  ct_index: number;
  ct_scroll: string;
}

export interface SegmentInfo {
  id: string;
  display_name: string;
  category: string;
  synonyms: string[];
}

export interface CaseSummary {
  case_id: string;
  diagnosis: string;
  resection_margin_mm: number;
  segments: SegmentInfo[];
}

export interface HttpError extends Error {
  status: number;
  detail?: string;
}

export interface HttpClient {
  getJson(path: string): Promise<any>;
  postJson(path: string, body: unknown): Promise<any>;
  del(path: string): Promise<void>;
}

/** Minimal socket surface so tests and node can stand in for WebSocket. */
export interface SocketLike {
  onmessage: ((data: string) => void) | null;
  onclose: (() => void) | null;
  close(): void;
}

export type SocketFactory = (path: string) => SocketLike;

export interface FeedEntry {
  seq: number;
  kind: string;
  text: string;
}

export type ConnectionState = "idle" | "live" | "reconnecting" | "lost";

export interface CorrectionState {
  open: boolean;
  sentence: string;
  calls: string[];
  error: string | null;
}

export interface ConsoleOptions {
  chime?: () => void;
  chimeEnabled?: boolean;
  reconnectBaseMs?: number;
  maxReconnectAttempts?: number;
  setTimeoutFn?: (fn: () => void, ms: number) => void;
}

const RELEASING_KINDS = new Set([
  "Feedback", "NoMatch", "Rejected", "StateSnapshot", "ResetPerformed", "QueryEmpty",
]);

export class ConsoleCore {
  caseSummary: CaseSummary | null = null;
  cases: { case_id: string; segments: number }[] = [];
  sessionId: string | null = null;
  mode: "grammar" | "llm" = "grammar";
  profile: "study" | "refined" = "study";
  scene: SceneSnapshot | null = null;
  lastSeq = 0;
  feed: FeedEntry[] = [];
  connection: ConnectionState = "idle";
  inputDisabled = false;
  banner: string | null = null;
  exampleCount: number | null = null;
  correction: CorrectionState = { open: false, sentence: "", calls: [], error: null };
  chimeEnabled: boolean;

  private readonly http: HttpClient;
  private readonly socketFactory: SocketFactory;
  private readonly chime: () => void;
  private readonly reconnectBaseMs: number;
  private readonly maxReconnectAttempts: number;
  private readonly setTimeoutFn: (fn: () => void, ms: number) => void;
  private socket: SocketLike | null = null;
  private reconnectAttempts = 0;
  private closedByUser = false;
  private listeners: (() => void)[] = [];

  constructor(http: HttpClient, socketFactory: SocketFactory, opts: ConsoleOptions = {}) {
    this.http = http;
    this.socketFactory = socketFactory;
    this.chime = opts.chime ?? (() => undefined);
    this.chimeEnabled = opts.chimeEnabled ?? true;
    this.reconnectBaseMs = opts.reconnectBaseMs ?? 500;
    this.maxReconnectAttempts = opts.maxReconnectAttempts ?? 8;
    this.setTimeoutFn = opts.setTimeoutFn ?? ((fn, ms) => setTimeout(fn, ms));
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  /** Segments grouped by category with visibility flags, for badge rows. */
  badgeGroups(): { category: string; badges: { id: string; label: string; visible: boolean }[] }[] {
    if (!this.caseSummary) return [];
    const groups = new Map<string, { id: string; label: string; visible: boolean }[]>();
    for (const seg of this.caseSummary.segments) {
      const row = groups.get(seg.category) ?? [];
      row.push({
        id: seg.id,
        label: seg.display_name,
        visible: this.scene?.visible[seg.id] ?? false,
      });
      groups.set(seg.category, row);
    }
    return [...groups.entries()].map(([category, badges]) => ({ category, badges }));
  }

  visibleIds(): Set<string> {
    const out = new Set<string>();
    if (this.scene) {
      for (const [id, on] of Object.entries(this.scene.visible)) if (on) out.add(id);
    }
    return out;
  }

  async loadCases(): Promise<void> {
    this.cases = await this.http.getJson("/cases");
    this.notify();
  }

  async selectCase(caseId: string): Promise<void> {
    this.caseSummary = await this.http.getJson(`/cases/${caseId}`);
    this.notify();
  }

  async createSession(mode: "grammar" | "llm", profile: "study" | "refined"): Promise<void> {
    if (!this.caseSummary) throw new Error("select a case first");
    this.disconnect();
    const created = await this.http.postJson("/sessions", {
      case_id: this.caseSummary.case_id, mode, profile,
    });
    this.sessionId = created.session_id;
    this.mode = mode;
    this.profile = profile;
    this.scene = created.state;
    this.lastSeq = 0;
    this.feed = [];
    this.banner = null;
    this.inputDisabled = false;
    this.exampleCount = null;
    this.subscribe();
    this.notify();
  }

  subscribe(): void {
    if (!this.sessionId) return;
    this.closedByUser = false;
    this.openSocket();
  }

  private openSocket(): void {
    const path = `/sessions/${this.sessionId}/events?since=${this.lastSeq}`;
    const socket = this.socketFactory(path);
    this.socket = socket;
    this.connection = "live";
    socket.onmessage = (data) => {
      // traffic proves the link is genuinely up; only then reset the backoff
      this.reconnectAttempts = 0;
      this.applyFrame(JSON.parse(data) as EventFrame);
    };
    socket.onclose = () => {
      if (this.closedByUser) return;
      this.scheduleReconnect();
    };
    this.notify();
  }

  private scheduleReconnect(): void {
    if (this.reconnectAttempts >= this.maxReconnectAttempts) {
      this.connection = "lost";
      this.banner = "connection lost";
      this.notify();
      return;
    }
    this.connection = "reconnecting";
    this.banner = "connection lost, retrying…";
    this.notify();
    const delay = this.reconnectBaseMs * 2 ** this.reconnectAttempts;
    this.reconnectAttempts += 1;
    this.setTimeoutFn(() => {
      if (!this.closedByUser && this.sessionId) this.openSocket();
    }, delay);
  }

  disconnect(): void {
    this.closedByUser = true;
    this.socket?.close();
    this.socket = null;
    this.connection = "idle";
  }

  /** Frames apply strictly in order; duplicates drop, gaps force a refetch. */
  applyFrame(frame: EventFrame): void {
    if (frame.seq <= this.lastSeq) return; // duplicate after a resume
    if (frame.seq > this.lastSeq + 1) {
      void this.refetchState(frame.seq);
      return;
    }
    this.lastSeq = frame.seq;
    this.handleFrame(frame);
    this.notify();
  }

  private handleFrame(frame: EventFrame): void {
    const { kind, payload } = frame;
    switch (kind) {
      case "StateSnapshot":
        this.scene = payload.state as SceneSnapshot;
        break;
      case "Feedback": {
        const text = String(payload.text);
        this.pushFeed(frame, text);
        if (payload.kind === "retry") this.banner = text;
        if (text === "OK" && this.chimeEnabled) this.chime();
        break;
      }
      case "KeywordRecognized":
        this.pushFeed(frame, `keyword: ${payload.phrase}`);
        break;
      case "QueryReady":
        // post-hoc query text only; there is no live transcription panel
        this.pushFeed(frame, `you said: ${payload.text}`);
        break;
      case "QueryEmpty":
        this.pushFeed(frame, "nothing heard");
        break;
      case "Effect":
        this.pushFeed(frame, describeEffect(payload));
        break;
      case "ResetPerformed":
        this.exampleCount = payload.example_count ?? null;
        this.banner = String(payload.message);
        this.pushFeed(frame, String(payload.message));
        break;
      case "Diagnostic":
        this.pushFeed(frame, `diagnostic: ${payload.message}`);
        break;
      case "NoMatch":
        this.pushFeed(frame, `no keyword recognized in: ${payload.utterance}`);
        break;
      case "Rejected":
        this.pushFeed(frame, `rejected: ${(payload.reasons ?? []).join("; ")}`);
        break;
      default:
        this.pushFeed(frame, kind);
    }
    if (this.inputDisabled && RELEASING_KINDS.has(kind)) {
      this.inputDisabled = false;
    }
  }

  private pushFeed(frame: EventFrame, text: string): void {
    this.feed.push({ seq: frame.seq, kind: frame.kind, text });
    if (this.feed.length > 200) this.feed.shift();
  }

  private async refetchState(seenSeq: number): Promise<void> {
    if (!this.sessionId) return;
    const view = await this.http.getJson(`/sessions/${this.sessionId}/state`);
    this.scene = view.state as SceneSnapshot;
    this.lastSeq = Math.max(view.seq as number, seenSeq);
    this.notify();
  }

  async submitUtterance(text: string): Promise<void> {
    if (!this.sessionId) throw new Error("no session");
    if (this.inputDisabled) return; // one in flight
    this.banner = null;
    this.inputDisabled = true;
    this.notify();
    try {
      const summary = await this.http.postJson(
        `/sessions/${this.sessionId}/utterance`,
        { text, at_ms: Date.now() },
      );
      if (summary.outcome !== "listening") {
        // immediate outcomes (grammar mode, activation chime) release input;
        // a pending dictation window keeps it held until an event frame lands
        this.inputDisabled = false;
      }
    } catch (error) {
      this.inputDisabled = false;
      this.banner = errorText(error);
    }
    this.notify();
  }

  openCorrection(): void {
    this.correction = { open: true, sentence: "", calls: [], error: null };
    this.notify();
  }

  closeCorrection(): void {
    this.correction = { open: false, sentence: "", calls: [], error: null };
    this.notify();
  }

  async confirmCorrection(sentence: string, calls: string[]): Promise<boolean> {
    const cleaned = calls.map((c) => c.trim()).filter((c) => c.length > 0);
    if (cleaned.length === 0) {
      this.correction = { ...this.correction, error: "at least one function call is required" };
      this.notify();
      return false; // blocked client-side
    }
    if (!sentence.trim()) {
      this.correction = { ...this.correction, error: "the wrong sentence is required" };
      this.notify();
      return false;
    }
    if (!this.sessionId) throw new Error("no session");
    try {
      const outcome = await this.http.postJson(
        `/sessions/${this.sessionId}/correction`,
        { sentence, result: cleaned },
      );
      this.exampleCount = outcome.example_count ?? this.exampleCount;
      this.correction = { open: false, sentence: "", calls: [], error: null };
      this.notify();
      return true;
    } catch (error) {
      this.correction = { ...this.correction, error: errorText(error) };
      this.notify();
      return false;
    }
  }

  async fetchPromptInfo(): Promise<{ example_count: number; turn_count: number } | null> {
    if (!this.sessionId || this.mode !== "llm") return null;
    const view = await this.http.getJson(`/sessions/${this.sessionId}/prompt`);
    this.exampleCount = view.example_count;
    this.notify();
    return view;
  }
}

function describeEffect(payload: Record<string, any>): string {
  const detail = payload.detail ?? {};
  switch (payload.kind) {
    case "VisibilityChanged": {
      const changes = Object.entries(detail.changes ?? {})
        .map(([id, on]) => `${id}=${on ? "on" : "off"}`)
        .join(", ");
      return `visibility: ${changes || detail.target}`;
    }
    case "ControlApplied":
      return `control: ${detail.action}`;
    case "CaptureRequested":
      return `capture requested: ${detail.capture}`;
    case "PoseReset":
      return "pose reset";
    case "ChatReset":
      return "chat reset";
    default:
      return String(payload.kind);
  }
}

function errorText(error: unknown): string {
  if (error && typeof error === "object" && "detail" in error && (error as HttpError).detail) {
    return String((error as HttpError).detail);
  }
  return error instanceof Error ? error.message : String(error);
}
