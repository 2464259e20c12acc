/** Wire types for the annotation service (all payloads carry schema_version). */

export interface RoundInfo {
  schema_version: number;
  t: number;
  T: number;
  state: "awaiting_labels" | "completed";
  pending: number;
  batch_size: number;
  labeled_total: number;
}

export interface Task {
  sample_index: number;
  payload: string;
  round: number;
  uncertainty: number | null;
  region_id: number;
}

export interface ClassOption {
  id: number;
  name: string;
}

export interface RoundRecord {
  schema_version: number;
  t: number;
  strategy: string;
  test_accuracy: number | null;
  labeled_total: number;
  query_indices: number[];
  selftrain_size: number;
  pseudo_label_accuracy: number | null;
  region_summary: unknown;
}

export interface SubmitAck {
  schema_version: number;
  accepted: boolean;
  duplicate: boolean;
  sample_index: number;
  class: number;
  pending: number;
}

export interface AdvanceResult extends RoundInfo {
  completed_round?: number;
  test_accuracy?: number | null;
}
