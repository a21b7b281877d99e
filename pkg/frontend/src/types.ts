/**
 * Wire types mirroring the gateway's JSON bodies. The console never invents
 * fields of its own: everything displayed traces back to one of these.
 */

export interface CandidateAnswer {
  source_model: string;
  answer: string;
}

export interface AdjudicationItem {
  id: string;
  task_id: string;
  candidate_answers: CandidateAnswer[];
  disagreement_summary: string;
  status: 'pending' | 'resolved';
  resolution: { gold: unknown; expert_id: string } | null;
  created_at: number;
}

export interface TaskView {
  id: string;
  task_type: string;
  prompt: string;
  context_docs: string[];
  domain_tag: string;
  verification_level: string;
}

export interface FunnelStats {
  tasks: number;
  verification_levels: Record<string, number>;
  pending_adjudications: number;
  stratum_distribution: Record<string, number>;
  mastery_pool_size: number;
  store_counts: Record<string, number>;
}

export type GoldPayload =
  | { type: 'numeric'; value: number; tolerance_abs?: number; tolerance_rel?: number }
  | { type: 'exact_text'; text: string }
  | { type: 'rubric'; criteria: string };

export interface ErrorBody {
  code: string;
  message: string;
  detail: unknown;
}
