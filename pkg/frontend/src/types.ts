// Payload shapes of the session service (JSON over HTTP).

export interface Candidate {
  id: number;
  objectives: number[];
}

export interface CandidatesPayload {
  interaction: number;
  mask: number[];
  candidates: Candidate[];
}

export interface InteractionSummary {
  index: number;
  mask: number[];
  n_active: number;
  ranks: number[];
  detection: { p_values?: number[] } | null;
}

export interface FinalPayload {
  x: number[];
  objectives: number[];
  mask: number[];
}

export interface SessionPayload {
  id: string;
  phase: "evolving" | "awaiting_ranking" | "finished";
  interaction: number;
  total_interactions: number;
  n_potential_objectives: number;
  mask: number[];
  masks_history: number[][];
  interactions: InteractionSummary[];
  final: FinalPayload | null;
}

export interface ApiError {
  status: number;
  detail: string;
}
