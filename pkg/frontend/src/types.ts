// Mirrors of the /api/v1 JSON shapes. The console renders these verbatim;
// every rule outcome, route, and winner below is server-computed.

export interface PipelineSummary {
  pipeline_id: string;
  project: string;
  domain: string;
  scale: string;
  status: string;
  branches: string[];
  records: number;
  findings: number;
}

export interface ToolView {
  name: string;
  tool_type: string;
  context_mechanism: string;
}

export interface StageRecordView {
  record_id: string;
  stage: string;
  stage_label: string;
  branch_id: string;
  status: string;
  tool: ToolView | null;
  package_id: string | null;
  output_artifact: string | null;
  waiver_reason: string | null;
  finding_ids: string[];
  patterns: string[];
}

export interface FindingView {
  finding_id: string;
  severity: string;
  severity_label: string;
  category: string;
  category_label: string;
  description: string;
  branch_id: string;
  target_stage: string;
  target_stage_label: string;
  record_id: string | null;
}

export interface PipelineDetail {
  pipeline_id: string;
  project: string;
  domain: string;
  scale: string;
  status: string;
  branches: Record<string, string | null>;
  records: StageRecordView[];
  findings: FindingView[];
  packages: Record<string, string>;
  close_warnings: string[];
}

export interface Warning {
  code: string;
  message: string;
}

export interface StageOutcome {
  record: StageRecordView;
  warnings: Warning[];
}

export interface FindingResult {
  finding_id: string;
  severity: string;
  category: string;
  category_label: string;
  target_stage: string;
  target_stage_label: string;
  record_id: string;
  reopened: boolean;
}

export interface FindingRoute {
  category_label: string;
  target_stage: string;
  target_stage_label: string;
}

export type FindingRoutes = Record<string, FindingRoute>;

export interface ManifestElement {
  element_id: string;
  label: string;
  role: string;
  source_kind: string;
  content_ref: string;
  token_estimate?: number;
  reviewed?: boolean;
  tags?: string[];
}

export interface Manifest {
  package_id: string;
  pipeline_id: string;
  stage: string;
  elements: ManifestElement[];
}

export interface ElementView {
  element_id: string;
  label: string;
  role: string;
  role_label: string;
  role_priority: number;
  source_kind: string;
  token_estimate: number;
  reviewed: boolean;
  tags: string[];
}

export interface PackageFindingView {
  severity: string;
  code: string;
  message: string;
}

export interface PackageView {
  manifest: Manifest;
  total_tokens: number;
  size_class: string;
  elements: ElementView[];
  findings: PackageFindingView[];
}

export interface Resolution {
  winner: string | null;
  loser: string | null;
  outcome: string;
  rationale: string;
}

export interface TrailEvent {
  seq: number;
  timestamp: string;
  kind: string;
  pipeline_id: string;
  payload: Record<string, unknown>;
  digest: string;
  prev_digest: string;
}

export interface TrailView {
  pipeline_id: string;
  events: TrailEvent[];
  verify: { ok: boolean; at_seq: number | null; reason: string | null };
  rendered: string;
}

export interface QualityRow {
  group: string;
  total: number;
  first_pass: number;
  iterated: number;
  partial: number;
  failed: number;
  first_pass_pct: number;
  final_success_pct: number;
  avg_iterations: number;
  avg_is_lower_bound: boolean;
}

export interface AuthorityRow {
  authority: string;
  total: number;
  first_pass: number;
  first_pass_pct: number;
}

export interface SizeRow {
  size: string;
  total: number;
  avg_iterations: number;
  first_pass_pct: number;
  avg_is_lower_bound: boolean;
}

export interface TemplateType {
  name: string;
  stages: string[];
  evidence_note: string;
}
