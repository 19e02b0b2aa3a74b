// Thin fetch client for the ctxpipe HTTP API. No rule evaluation happens
// here: requests go out, JSON comes back, errors surface as ApiError.

import type {
  AuthorityRow,
  FindingResult,
  FindingRoutes,
  Manifest,
  PackageView,
  PipelineDetail,
  PipelineSummary,
  QualityRow,
  Resolution,
  SizeRow,
  StageOutcome,
  TemplateType,
  TrailView,
  Warning,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public rule: number | null = null,
  ) {
    super(message);
    this.name = "ApiError";
  }

  get busy(): boolean {
    return this.status === 423;
  }
}

export class Client {
  constructor(
    private base: string = "",
    private token: string | null = null,
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const resp = await fetch(`${this.base}/api/v1${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await resp.text();
    let doc: unknown = null;
    try {
      doc = text ? JSON.parse(text) : null;
    } catch {
      doc = null;
    }
    if (!resp.ok) {
      const envelope = doc as {
        error?: { code: string; message: string; rule: number | null };
      } | null;
      if (envelope?.error) {
        throw new ApiError(
          resp.status,
          envelope.error.code,
          envelope.error.message,
          envelope.error.rule,
        );
      }
      throw new ApiError(resp.status, "HTTP_ERROR", text || resp.statusText);
    }
    return doc as T;
  }

  private get<T>(path: string): Promise<T> {
    return this.request<T>("GET", path);
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>("POST", path, body);
  }

  health(): Promise<{ status: string; version: string }> {
    return this.get("/health");
  }

  // pipelines

  listPipelines(): Promise<{ pipelines: PipelineSummary[] }> {
    return this.get("/pipelines");
  }

  createPipeline(body: {
    project: string;
    domain: string;
    scale: string;
  }): Promise<PipelineSummary> {
    return this.post("/pipelines", body);
  }

  getPipeline(id: string): Promise<PipelineDetail> {
    return this.get(`/pipelines/${id}`);
  }

  beginStage(
    id: string,
    body: {
      stage: string;
      tool: { name: string; type: string; mechanism?: string };
      package_id: string;
      branch?: string;
    },
  ): Promise<StageOutcome> {
    return this.post(`/pipelines/${id}/stages`, body);
  }

  completeStage(
    id: string,
    recordId: string,
    body: { artifact: string; patterns?: string[] },
  ): Promise<StageOutcome> {
    return this.post(`/pipelines/${id}/stages/${recordId}/complete`, body);
  }

  skipStage(
    id: string,
    body: { stage: string; reason: string; branch?: string },
  ): Promise<StageOutcome> {
    return this.post(`/pipelines/${id}/stages/skip`, body);
  }

  findingRoutes(): Promise<{ routes: FindingRoutes }> {
    return this.get("/findings/routes");
  }

  recordFinding(
    id: string,
    body: {
      severity: string;
      category: string;
      description: string;
      branch?: string;
    },
  ): Promise<FindingResult> {
    return this.post(`/pipelines/${id}/findings`, body);
  }

  createBranches(
    id: string,
    body: { design_record: string; names: string[] },
  ): Promise<{ branches: string[] }> {
    return this.post(`/pipelines/${id}/branches`, body);
  }

  closePipeline(
    id: string,
    confirm = false,
  ): Promise<{ pipeline_id: string; status: string; warnings: Warning[] }> {
    return this.post(`/pipelines/${id}/close`, { confirm });
  }

  getTrail(id: string): Promise<TrailView> {
    return this.get(`/pipelines/${id}/trail`);
  }

  // packages

  listPackages(id: string): Promise<{ packages: string[] }> {
    return this.get(`/pipelines/${id}/packages`);
  }

  attachPackage(id: string, manifest: Manifest): Promise<PackageView> {
    return this.post(`/pipelines/${id}/packages`, { manifest });
  }

  getPackage(id: string, packageId: string): Promise<PackageView> {
    return this.get(`/pipelines/${id}/packages/${packageId}`);
  }

  resolveElements(
    manifest: Manifest,
    a: string,
    b: string,
  ): Promise<Resolution> {
    return this.post("/packages/resolve", { manifest, a, b });
  }

  // templates (read-only in the console)

  listTemplates(): Promise<{ types: TemplateType[] }> {
    return this.get("/templates");
  }

  getTemplate(
    name: string,
  ): Promise<{ name: string; evidence_note: string; templates: Record<string, string> }> {
    return this.get(`/templates/${name}`);
  }

  // datasets and reports

  listDatasets(): Promise<{ datasets: string[] }> {
    return this.get("/datasets");
  }

  qualityReport(
    name: string,
    groupBy: string,
  ): Promise<{ kind: string; rows: QualityRow[] }> {
    return this.get(`/datasets/${name}/reports/quality?group_by=${groupBy}`);
  }

  authorityReport(name: string): Promise<{ kind: string; rows: AuthorityRow[] }> {
    return this.get(`/datasets/${name}/reports/authority`);
  }

  sizeReport(name: string): Promise<{ kind: string; rows: SizeRow[] }> {
    return this.get(`/datasets/${name}/reports/size`);
  }

  stagesReport(
    name: string,
  ): Promise<{ kind: string; rows: Record<string, number> }> {
    return this.get(`/datasets/${name}/reports/stages`);
  }
}
