// Gateway JSON shapes. The console never computes classifications itself;
// every number shown comes from these documents.

export interface BeliefPair {
  bel_n: number;
  bel_f: number;
}

export interface DetectorEntry {
  present: boolean;
  box: number[] | null;
}

export interface Verdict {
  user_id: string;
  per_frame_beliefs: BeliefPair[];
  fused: BeliefPair | null;
  decision: "normal" | "misbehaving" | "dark_webcam";
  skin_probability: number;
  evidence_log: Record<string, DetectorEntry>[];
  sp: number[] | null;
  skc: number | null;
}

export type ItemStatus =
  | "pending"
  | "confirmed_misbehaving"
  | "overridden_normal";

export interface QueueItem {
  item_id: string;
  user_id: string;
  status: ItemStatus;
  created_at: number;
  fused: BeliefPair | null;
  skin_probability: number;
  moderator_id: string | null;
  decided_at: number | null;
}

export interface ItemDetail extends QueueItem {
  verdict: Verdict;
  frames: string[];
}

export interface QueuePayload {
  items: QueueItem[];
}

export interface OverlayIndex {
  frames: string[];
}

export interface FeedbackRow {
  item_id: string;
  user_id: string;
  label: "normal" | "misbehaving";
  sp: number[] | null;
  moderator_id: string;
  decided_at: number;
}

export type Decision = "confirm" | "override";
