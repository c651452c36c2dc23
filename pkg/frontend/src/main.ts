/** DOM wiring for the operator console. All logic lives in console-core. */

import { ConsoleCore } from "./console-core.js";
import { makeHttpClient, makeSocketFactory } from "./transport.js";

const httpBase = "";
const wsBase = (location.protocol === "https:" ? "wss://" : "ws://") + location.host;

function chime(): void {
  try {
    const ctx = new AudioContext();
    const osc = ctx.createOscillator();
    const gain = ctx.createGain();
    osc.frequency.value = 880;
    gain.gain.setValueAtTime(0.08, ctx.currentTime);
    gain.gain.exponentialRampToValueAtTime(0.0001, ctx.currentTime + 0.25);
    osc.connect(gain).connect(ctx.destination);
    osc.start();
    osc.stop(ctx.currentTime + 0.25);
  } catch {
    // audio is best-effort; some browsers refuse before a user gesture
  }
}

const core = new ConsoleCore(
  makeHttpClient(httpBase),
  makeSocketFactory(wsBase, WebSocket as never),
  { chime },
);

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

function render(): void {
  const caseSelect = $<HTMLSelectElement>("case-select");
  if (caseSelect.options.length !== core.cases.length + 1) {
    caseSelect.innerHTML = '<option value="">select case…</option>' + core.cases
      .map((c) => `<option value="${c.case_id}">${c.case_id} (${c.segments} segments)</option>`)
      .join("");
  }

  $("session-info").textContent = core.sessionId
    ? `session ${core.sessionId.slice(0, 8)} — ${core.mode} / ${core.profile}`
    : "no session";
  const connEl = $("connection");
  connEl.textContent = core.connection;
  connEl.className = `conn conn-${core.connection}`;

  const bannerEl = $("banner");
  bannerEl.textContent = core.banner ?? "";
  bannerEl.style.display = core.banner ? "block" : "none";

  $("diagnosis").textContent = core.caseSummary?.diagnosis ?? "";

  const badgesEl = $("badges");
  badgesEl.innerHTML = core.badgeGroups().map((group) => `
    <div class="badge-group">
      <h3>${group.category}</h3>
      <div class="badge-row">
        ${group.badges.map((b) =>
          `<span class="badge ${b.visible ? "badge-on" : ""}" data-id="${b.id}">${b.label}</span>`,
        ).join("")}
      </div>
    </div>`).join("");

  const flags = core.scene;
  $("flags").textContent = flags
    ? `frozen=${flags.frozen} tracking=${flags.marker_tracking} ct=${flags.ct_panel_open}` +
      ` (slice ${flags.ct_index}, ${flags.ct_scroll}) patient-info=${flags.patient_panel_open}`
    : "";

  const feedEl = $("feed");
  feedEl.innerHTML = core.feed.slice(-60).map((entry) =>
    `<div class="feed-entry feed-${entry.kind}"><span class="seq">#${entry.seq}</span>` +
    ` <span class="kind">${entry.kind}</span> ${escapeHtml(entry.text)}</div>`,
  ).join("");
  feedEl.scrollTop = feedEl.scrollHeight;

  $<HTMLInputElement>("utterance").disabled = core.inputDisabled || !core.sessionId;
  $<HTMLButtonElement>("say").disabled = core.inputDisabled || !core.sessionId;
  $("examples").textContent = core.exampleCount === null
    ? "" : `prompt examples: ${core.exampleCount}`;

  $("correction-dialog").style.display = core.correction.open ? "block" : "none";
  $("correction-error").textContent = core.correction.error ?? "";
}

function escapeHtml(text: string): string {
  return text.replace(/[&<>"]/g, (ch) =>
    ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;" }[ch] as string));
}

async function boot(): Promise<void> {
  core.onChange(render);
  await core.loadCases();

  $("case-select").addEventListener("change", (event) => {
    const id = (event.target as HTMLSelectElement).value;
    if (id) void core.selectCase(id);
  });

  $("start").addEventListener("click", () => {
    const mode = $<HTMLSelectElement>("mode-select").value as "grammar" | "llm";
    const profile = $<HTMLSelectElement>("profile-select").value as "study" | "refined";
    void core.createSession(mode, profile);
  });

  const utterance = $<HTMLInputElement>("utterance");
  const send = (): void => {
    const text = utterance.value.trim();
    if (!text) return;
    utterance.value = "";
    void core.submitUtterance(text);
  };
  $("say").addEventListener("click", send);
  utterance.addEventListener("keydown", (event) => {
    if (event.key === "Enter") send();
    // quick activation shortcut for llm mode
    if (event.key === "!" && utterance.value === "") {
      event.preventDefault();
      void core.submitUtterance("assistant");
    }
  });

  $("chime-toggle").addEventListener("change", (event) => {
    core.chimeEnabled = (event.target as HTMLInputElement).checked;
  });

  $("open-correction").addEventListener("click", () => core.openCorrection());
  $("correction-cancel").addEventListener("click", () => core.closeCorrection());
  $("correction-confirm").addEventListener("click", () => {
    const sentence = $<HTMLInputElement>("correction-sentence").value;
    const calls = $<HTMLTextAreaElement>("correction-calls").value.split("\n");
    void core.confirmCorrection(sentence, calls);
  });

  render();
}

void boot();
