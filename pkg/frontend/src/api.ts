/** Typed client for the course service's HTTP/JSON API. */

export interface CourseSummary {
  course_id: string;
  title: string;
}

export interface ModuleEntry {
  module_id: string;
  title: string;
  units: string[];
}

export interface UnitEntry {
  unit_id: string;
  module_id: string;
  title: string;
  kind: "content" | "assignment";
  source_digest: string;
  html_path: string;
  points_possible?: number;
  release_path?: string;
  spec_path?: string;
}

export interface SequenceView {
  schema: number;
  course_id: string;
  title: string;
  modules: ModuleEntry[];
  units: UnitEntry[];
}

export interface GradeRow {
  grade_id: string;
  points: number;
  earned: number;
  passed: boolean;
  message: string | null;
}

export interface GradeReport {
  assignment_id: string;
  earned: number;
  possible: number;
  tampered: boolean;
  duration_ms: number;
  rows: GradeRow[];
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface JobView {
  job_id: string;
  submission_id: string;
  state: JobState;
  report: GradeReport | null;
  error: string | null;
}

export interface GradebookEntry {
  course_id: string;
  assignment_id: string;
  user_id: string;
  score: number;
  earned: number;
  possible: number;
  submission_id: string;
  recorded_at: string;
  policy: string;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") return body.detail;
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return `${response.status} ${response.statusText}`;
}

export class Client {
  constructor(
    private readonly base: string = "",
    private readonly token: string | null = null,
    private readonly fetcher: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private headers(extra?: Record<string, string>): Record<string, string> {
    const headers: Record<string, string> = { ...extra };
    if (this.token) headers["authorization"] = `Bearer ${this.token}`;
    return headers;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetcher(this.base + path, init);
    if (!response.ok) throw new ApiError(response.status, await errorDetail(response));
    return response;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.request(path, init);
    return (await response.json()) as T;
  }

  courses(): Promise<CourseSummary[]> {
    return this.json("/api/courses", { headers: this.headers() });
  }

  sequence(courseId: string): Promise<SequenceView> {
    const path = `/api/courses/${encodeURIComponent(courseId)}/sequence`;
    return this.json(path, { headers: this.headers() });
  }

  async unitHtml(unitId: string): Promise<string> {
    const path = `/api/units/${encodeURIComponent(unitId)}/html`;
    const response = await this.request(path, { headers: this.headers() });
    return response.text();
  }

  /** Download location of the released notebook; used as a plain link. */
  releaseUrl(assignmentId: string): string {
    return `${this.base}/api/assignments/${encodeURIComponent(assignmentId)}/release`;
  }

  submit(
    assignmentId: string,
    userId: string,
    body: BodyInit,
  ): Promise<{ job_id: string }> {
    const path =
      `/api/assignments/${encodeURIComponent(assignmentId)}/submissions` +
      `?user_id=${encodeURIComponent(userId)}`;
    return this.json(path, {
      method: "POST",
      body,
      headers: this.headers({ "content-type": "application/x-ipynb+json" }),
    });
  }

  job(jobId: string): Promise<JobView> {
    return this.json(`/api/jobs/${encodeURIComponent(jobId)}`, {
      headers: this.headers(),
    });
  }

  async gradebook(courseId: string, userId: string): Promise<GradebookEntry[]> {
    const path =
      `/api/gradebook/${encodeURIComponent(courseId)}/${encodeURIComponent(userId)}`;
    const body = await this.json<{ entries: GradebookEntry[] }>(path, {
      headers: this.headers(),
    });
    return body.entries;
  }
}
