// Pure string renderers. Every displayed number carries the exact payload
// value in a data-value attribute; the visible text is display formatting
// only, so nothing the service sent is ever altered client-side.

import type { Candidate, CandidatesPayload, FinalPayload } from "./types.js";

/** Round-trip-exact string form: Number(fullPrecision(v)) === v. */
export function fullPrecision(value: number): string {
  return String(value);
}

export function displayValue(value: number): string {
  if (!Number.isFinite(value)) return String(value);
  const abs = Math.abs(value);
  if (value !== 0 && (abs >= 1e5 || abs < 1e-4)) return value.toExponential(4);
  return String(Number(value.toPrecision(6)));
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function objectiveHeaders(m: number, mask: number[]): string {
  const cells = [];
  for (let i = 0; i < m; i++) {
    const cls = mask[i] === 1 ? "objective active" : "objective inactive";
    cells.push(`<th class="${cls}" data-objective="${i + 1}">f${i + 1}</th>`);
  }
  return cells.join("");
}

export function renderCandidateTable(
  payload: CandidatesPayload,
  rankOf: (id: number) => number | null = () => null,
): string {
  const m = payload.candidates.length > 0 ? payload.candidates[0].objectives.length : 0;
  const rows = payload.candidates
    .map((candidate) => {
      const rank = rankOf(candidate.id);
      const rankText = rank === null ? "&mdash;" : String(rank);
      const cells = candidate.objectives
        .map(
          (v, i) =>
            `<td class="value${payload.mask[i] === 1 ? " active" : ""}" ` +
            `data-value="${fullPrecision(v)}">${displayValue(v)}</td>`,
        )
        .join("");
      return (
        `<tr class="candidate" data-candidate="${candidate.id}" draggable="true">` +
        `<td class="rank">${rankText}</td><td class="name">solution ${candidate.id + 1}</td>` +
        cells +
        `</tr>`
      );
    })
    .join("");
  return (
    `<table class="candidates" data-interaction="${payload.interaction}">` +
    `<thead><tr><th>rank</th><th></th>${objectiveHeaders(m, payload.mask)}</tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

/** Per-objective axes normalized for display only; raw values kept as data. */
export function renderParallelCoords(
  candidates: Candidate[],
  mask: number[],
  width = 640,
  height = 240,
): string {
  if (candidates.length === 0) return `<svg class="parcoords"></svg>`;
  const m = candidates[0].objectives.length;
  const pad = 24;
  const axisX = (i: number) => (m === 1 ? width / 2 : pad + (i * (width - 2 * pad)) / (m - 1));
  const lows: number[] = [];
  const highs: number[] = [];
  for (let i = 0; i < m; i++) {
    const column = candidates.map((c) => c.objectives[i]);
    lows.push(Math.min(...column));
    highs.push(Math.max(...column));
  }
  const yOf = (v: number, i: number) => {
    const span = highs[i] - lows[i];
    const norm = span > 0 ? (v - lows[i]) / span : 0.5;
    return height - pad - norm * (height - 2 * pad);
  };
  const axes = Array.from({ length: m }, (_, i) => {
    const cls = mask[i] === 1 ? "axis active" : "axis inactive";
    return (
      `<line class="${cls}" x1="${axisX(i)}" y1="${pad}" x2="${axisX(i)}" y2="${height - pad}"/>` +
      `<text class="axis-label" x="${axisX(i)}" y="${height - 6}">f${i + 1}</text>`
    );
  }).join("");
  const lines = candidates
    .map((candidate) => {
      const points = candidate.objectives
        .map((v, i) => `${axisX(i).toFixed(1)},${yOf(v, i).toFixed(1)}`)
        .join(" ");
      const raw = candidate.objectives.map(fullPrecision).join(";");
      return (
        `<polyline class="candidate-line" data-candidate="${candidate.id}" ` +
        `data-raw="${raw}" points="${points}" fill="none"/>`
      );
    })
    .join("");
  return (
    `<svg class="parcoords" viewBox="0 0 ${width} ${height}" ` +
    `width="${width}" height="${height}">${axes}${lines}</svg>`
  );
}

/**
 * Strip chart of the active set: one row per objective, one column per
 * completed interaction; column 0 is the mask before any interaction.
 */
export function renderTimeline(masksHistory: number[][]): string {
  if (masksHistory.length === 0) return `<table class="timeline"></table>`;
  const m = masksHistory[0].length;
  const head = masksHistory
    .map((_, col) => `<th class="interaction" data-interaction="${col}">${col}</th>`)
    .join("");
  const body = Array.from({ length: m }, (_, obj) => {
    const cells = masksHistory
      .map((mask, col) => {
        const active = mask[obj] === 1;
        return (
          `<td class="cell${active ? " active" : ""}" data-objective="${obj + 1}" ` +
          `data-interaction="${col}">${active ? "&#9632;" : ""}</td>`
        );
      })
      .join("");
    return `<tr><th class="objective">f${obj + 1}</th>${cells}</tr>`;
  }).join("");
  return (
    `<table class="timeline"><thead><tr><th>objective</th>${head}</tr></thead>` +
    `<tbody>${body}</tbody></table>`
  );
}

export function renderFinal(final: FinalPayload): string {
  const values = final.objectives
    .map(
      (v, i) =>
        `<li class="final-objective${final.mask[i] === 1 ? " active" : ""}">` +
        `f${i + 1} = <span data-value="${fullPrecision(v)}">${displayValue(v)}</span></li>`,
    )
    .join("");
  return (
    `<section class="final"><h2>Most preferred solution</h2>` +
    `<ul class="final-objectives">${values}</ul></section>`
  );
}
