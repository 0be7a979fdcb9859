// Ranking board: the human orders candidates best-to-worst, optionally
// merging neighbors into a tie group. The board serializes to the
// competition-ranking integers the service expects (1, 2, 2, 4).

export interface RankingBoard {
  /** Ordered tie groups, best first; each group holds candidate ids. */
  groups: number[][];
  /** Candidates not yet placed. Submission requires this to be empty. */
  unranked: number[];
}

export function newBoard(candidateIds: number[]): RankingBoard {
  return { groups: [], unranked: [...candidateIds] };
}

function located(board: RankingBoard, id: number): [number, number] | null {
  for (let g = 0; g < board.groups.length; g++) {
    const pos = board.groups[g].indexOf(id);
    if (pos >= 0) return [g, pos];
  }
  return null;
}

/** Place an unranked candidate at the end of the order (new singleton group). */
export function placeNext(board: RankingBoard, id: number): RankingBoard {
  if (!board.unranked.includes(id)) return board;
  return {
    groups: [...board.groups, [id]],
    unranked: board.unranked.filter((v) => v !== id),
  };
}

/** Drag-to-order: move a placed candidate into its own group at `index`. */
export function moveToPosition(board: RankingBoard, id: number, index: number): RankingBoard {
  const loc = located(board, id);
  if (loc === null) return board;
  const groups = board.groups.map((g) => g.filter((v) => v !== id)).filter((g) => g.length > 0);
  const at = Math.max(0, Math.min(index, groups.length));
  groups.splice(at, 0, [id]);
  return { groups, unranked: board.unranked };
}

/** Tie toggle: merge a candidate into the previous group, or split it out. */
export function toggleTieWithPrevious(board: RankingBoard, id: number): RankingBoard {
  const loc = located(board, id);
  if (loc === null) return board;
  const [g, pos] = loc;
  const groups = board.groups.map((grp) => [...grp]);
  if (groups[g].length > 1) {
    groups[g].splice(pos, 1);
    groups.splice(g + 1, 0, [id]);
  } else if (g > 0) {
    groups[g - 1].push(id);
    groups.splice(g, 1);
  }
  return { groups, unranked: board.unranked };
}

export function resetBoard(board: RankingBoard): RankingBoard {
  const all = [...board.groups.flat(), ...board.unranked].sort((a, b) => a - b);
  return newBoard(all);
}

export function isComplete(board: RankingBoard): boolean {
  return board.unranked.length === 0 && board.groups.length > 0;
}

/**
 * Competition-ranking integers aligned with candidate ids 0..n-1:
 * a group's rank is 1 + the number of candidates in earlier groups,
 * so tied candidates share a rank and the next group skips (1, 2, 2, 4).
 */
export function toCompetitionRanks(board: RankingBoard): number[] {
  if (!isComplete(board)) {
    throw new Error("every candidate needs a rank before serialization");
  }
  const n = board.groups.reduce((acc, g) => acc + g.length, 0);
  const ranks = new Array<number>(n).fill(0);
  let seen = 0;
  for (const group of board.groups) {
    const rank = seen + 1;
    for (const id of group) {
      if (id < 0 || id >= n || ranks[id] !== 0) {
        throw new Error("candidate ids must be 0..n-1 without duplicates");
      }
      ranks[id] = rank;
    }
    seen += group.length;
  }
  return ranks;
}

/**
 * Submission guard: at most one in-flight submission per interaction.
 * The second caller gets the same promise instead of a second request,
 * so a double-click produces exactly one accepted ranking.
 */
export class SubmissionGuard<T> {
  private inflight: Promise<T> | null = null;
  private submittedInteraction: number | null = null;

  submit(interaction: number, send: () => Promise<T>): Promise<T> {
    if (this.submittedInteraction === interaction && this.inflight !== null) {
      return this.inflight;
    }
    this.submittedInteraction = interaction;
    this.inflight = send().catch((err) => {
      // allow a retry after a failed submission
      this.inflight = null;
      this.submittedInteraction = null;
      throw err;
    });
    return this.inflight;
  }

  armedFor(interaction: number): boolean {
    return this.submittedInteraction === interaction && this.inflight !== null;
  }

  releaseAfter(interaction: number): void {
    if (this.submittedInteraction === interaction) {
      this.inflight = null;
      this.submittedInteraction = null;
    }
  }
}
