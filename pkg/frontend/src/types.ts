// Wire types for the session service. Every rendered string originates
// from one of these payloads: the client owns zero game logic.

export interface ScenarioInfo {
  id: string;
  name: string;
  scenes: number;
  items: number;
  tools: number;
  key_steps: number;
  difficulties: string[];
}

export interface BagEntry {
  name: string;
  desc: string;
}

export interface ObservationPayload {
  scene_name: string;
  scene_text: string;
  item_texts: string[];
  interactable_items: string[];
  nearby_scenes: { label: string; target: string }[];
  bag: BagEntry[];
  text: string;
}

export interface ProgressPayload {
  completed_key_steps: string[];
  total_key_steps: number;
  collected_tools: number;
  total_tools: number;
  step_count: number;
  game_over: boolean;
  hints_used: number;
}

export interface SessionPayload {
  session_id: string;
  scenario_id: string;
  difficulty: string;
  role: string;
  finished: boolean;
  progress: ProgressPayload;
  hint: string | null;
  observation: ObservationPayload | null;
}

export interface ProgressEventPayload {
  kind: string;
  target: string | null;
}

export interface OutcomePayload {
  success: boolean;
  feedback: string;
  progress: ProgressEventPayload;
  game_over: boolean;
  failure: string | null;
  tools_gained: string[];
}

export interface HintUsagePayload {
  count: number;
  percent: number;
}

export interface MetricsPayload {
  hints_used: number;
  total_steps: number;
  early_exit_progress: number;
  tool_hints: HintUsagePayload;
  key_step_hints: HintUsagePayload;
  pre_hint_progress: number;
  progress_total: number;
  total_tools: number;
  total_key_steps: number;
}

export interface ActionResponse extends SessionPayload {
  outcome: OutcomePayload;
  parse_error: string | null;
  metrics: MetricsPayload;
}

export interface HintResponse {
  hint: string;
  target_scene: string;
  target_action: string;
  newly_activated: boolean;
  hints_used: number;
}
