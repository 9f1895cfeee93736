/**
 * Typed client for the inference service JSON schema.
 *
 * The fetch implementation is injectable so tests can stand up fake servers
 * with controlled latency.
 */

export type TransferMode = "pairwise" | "interpolated" | "hybrid" | "multimodal" | "reconstruct";

export interface TransferRequest {
  source_id: string;
  mode: TransferMode;
  reference_id?: string;
  reference_ids?: string[];
  alpha?: number;
  weights?: number[];
  seed?: number;
  code?: number[];
}

export interface TransferResponse {
  source_id: string;
  /** Exact parameters the server used, echoed back (normalized weights, seed, code). */
  params: Record<string, unknown>;
  result_png: string;
  mask_png: string;
  residual_png: string;
}

export interface UploadResponse {
  image_id: string;
  makeup_code: number[];
}

export interface ModelInfo {
  format_version: number;
  architecture: Record<string, unknown>;
  checkpoint: string;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class StudioApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async parse<T>(response: Response): Promise<T> {
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  async health(): Promise<{ status: string; model_loaded: boolean }> {
    return this.parse(await this.fetchImpl(`${this.baseUrl}/health`));
  }

  async modelInfo(): Promise<ModelInfo> {
    return this.parse(await this.fetchImpl(`${this.baseUrl}/model`));
  }

  async uploadImage(file: Blob, name = "upload.png"): Promise<UploadResponse> {
    const form = new FormData();
    form.append("file", file, name);
    return this.parse(await this.fetchImpl(`${this.baseUrl}/images`, { method: "POST", body: form }));
  }

  async transfer(request: TransferRequest, init?: RequestInit): Promise<TransferResponse> {
    return this.parse(
      await this.fetchImpl(`${this.baseUrl}/transfer`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(request),
        ...init,
      }),
    );
  }
}
