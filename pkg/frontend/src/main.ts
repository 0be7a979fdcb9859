// Browser wiring: one session per tab, server-authoritative state,
// re-fetched on focus. All rendering goes through the pure functions in
// render.ts; ranking state lives in a RankingBoard until submission.

import { ApiClientError, SessionApi } from "./api.js";
import {
  RankingBoard,
  SubmissionGuard,
  isComplete,
  moveToPosition,
  newBoard,
  placeNext,
  resetBoard,
  toCompetitionRanks,
  toggleTieWithPrevious,
} from "./ranking.js";
import { renderCandidateTable, renderFinal, renderParallelCoords, renderTimeline } from "./render.js";
import type { CandidatesPayload, SessionPayload } from "./types.js";

const api = new SessionApi("");
const guard = new SubmissionGuard<SessionPayload>();

let sessionId: string | null = null;
let board: RankingBoard = newBoard([]);
let candidates: CandidatesPayload | null = null;
let dragging: number | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setStatus(text: string, isError = false): void {
  const status = el<HTMLElement>("status");
  status.textContent = text;
  status.className = isError ? "status error" : "status";
}

function rankOf(id: number): number | null {
  if (!isComplete(board)) {
    let seen = 0;
    for (const group of board.groups) {
      if (group.includes(id)) return seen + 1;
      seen += group.length;
    }
    return null;
  }
  return toCompetitionRanks(board)[id];
}

function renderSession(session: SessionPayload): void {
  el<HTMLElement>("timeline").innerHTML = renderTimeline(session.masks_history);
  el<HTMLElement>("progress").textContent =
    session.phase === "finished"
      ? `finished after ${session.interactions.length} interactions`
      : `interaction ${session.interaction} of ${session.total_interactions}`;
  if (session.phase === "finished" && session.final) {
    el<HTMLElement>("candidates").innerHTML = renderFinal(session.final);
    el<HTMLElement>("parcoords").innerHTML = "";
    el<HTMLButtonElement>("submit").disabled = true;
  }
}

function renderCandidates(): void {
  if (!candidates) return;
  el<HTMLElement>("candidates").innerHTML = renderCandidateTable(candidates, rankOf);
  el<HTMLElement>("parcoords").innerHTML = renderParallelCoords(
    candidates.candidates,
    candidates.mask,
  );
  el<HTMLButtonElement>("submit").disabled = !isComplete(board);
  wireRows();
}

function wireRows(): void {
  document.querySelectorAll<HTMLTableRowElement>("tr.candidate").forEach((row) => {
    const id = Number(row.dataset.candidate);
    row.addEventListener("click", () => {
      board = board.unranked.includes(id) ? placeNext(board, id) : toggleTieWithPrevious(board, id);
      renderCandidates();
    });
    row.addEventListener("dragstart", () => {
      dragging = id;
    });
    row.addEventListener("dragover", (event) => event.preventDefault());
    row.addEventListener("drop", (event) => {
      event.preventDefault();
      if (dragging === null || dragging === id) return;
      const targetRank = rankOf(id);
      board = moveToPosition(board, dragging, targetRank === null ? board.groups.length : targetRank - 1);
      dragging = null;
      renderCandidates();
    });
  });
}

async function refresh(): Promise<void> {
  if (!sessionId) return;
  try {
    const session = await api.getSession(sessionId);
    renderSession(session);
    if (session.phase === "awaiting_ranking") {
      candidates = await api.getCandidates(sessionId);
      board = newBoard(candidates.candidates.map((c) => c.id));
      renderCandidates();
      setStatus("rank every solution (click in order of preference, click again to tie)");
    }
  } catch (err) {
    setStatus(err instanceof Error ? err.message : String(err), true);
  }
}

async function submitRanking(): Promise<void> {
  if (!sessionId || !candidates || !isComplete(board)) return;
  const interaction = candidates.interaction;
  const ranks = toCompetitionRanks(board);
  el<HTMLButtonElement>("submit").disabled = true;
  setStatus("submitting ranking...");
  try {
    const session = await guard.submit(interaction, () => api.submitRanking(sessionId!, ranks));
    renderSession(session);
    if (session.phase === "awaiting_ranking") {
      await refresh();
    } else {
      setStatus("run complete");
    }
  } catch (err) {
    if (err instanceof ApiClientError && err.status === 409) {
      await refresh(); // stale view: someone else advanced the session
    }
    setStatus(err instanceof Error ? err.message : String(err), true);
    el<HTMLButtonElement>("submit").disabled = !isComplete(board);
  }
}

async function createSession(): Promise<void> {
  const configText = el<HTMLTextAreaElement>("config").value;
  try {
    const config = JSON.parse(configText);
    const session = await api.createSession(config);
    sessionId = session.id;
    window.location.hash = session.id;
    setStatus(`session ${session.id} created`);
    await refresh();
  } catch (err) {
    setStatus(err instanceof Error ? err.message : String(err), true);
  }
}

export function start(): void {
  el<HTMLButtonElement>("create").addEventListener("click", () => void createSession());
  el<HTMLButtonElement>("submit").addEventListener("click", () => void submitRanking());
  el<HTMLButtonElement>("reset").addEventListener("click", () => {
    board = resetBoard(board);
    renderCandidates();
  });
  window.addEventListener("focus", () => void refresh());
  const fromHash = window.location.hash.replace(/^#/, "");
  if (fromHash) {
    sessionId = fromHash;
    void refresh();
  }
}

if (typeof document !== "undefined" && document.getElementById("create")) {
  start();
}
