/**
 * Typed client for the guiyun HTTP service.
 *
 * Every generation endpoint echoes the seed it used, so callers can
 * reproduce any result by resending the same body with that seed.
 */

export interface MeterReportJson {
  genre: string;
  strictness: string;
  rhyme_group: string[];
  lines: string[][];
  overall: string;
  scheme: number | null;
}

export interface AnalyzeResponse {
  genre: string;
  rhyme_group: string[];
  meter: MeterReportJson | null;
  tones: string[][];
  lines: string[];
  note: string | null;
}

export interface RhymePromptJson {
  group: string;
  positions: number[];
  end_chars: string[];
}

export interface GenerationResponse {
  poem: { lines: string[]; text: string; genre: string };
  meter: MeterReportJson;
  prompt: {
    mode: string;
    text: string;
    theme_words: string[];
    key_chars: string[];
    rhyme?: RhymePromptJson;
  };
  seed: number;
  beam_width: number;
  strictness_requested: string;
  strictness_used: string;
  relaxation_note: string | null;
  lm_id: string;
  entry_id: string;
}

export interface GenerateRequest {
  genre: string;
  first_line: string;
  theme_words: string[];
  key_chars: string[];
  style?: string | null;
  seed?: number | null;
  strictness?: string | null;
}

export interface FollowRhymeRequest {
  poem: string;
  seed?: number | null;
  theme_fraction?: number;
  key_fraction?: number;
  strictness?: string | null;
}

export interface ExtractResponse {
  theme_words: string[];
  key_chars: string[];
}

export interface LedgerCheckResponse {
  found: boolean;
  entry: { entry_id: string; created_at: string } | null;
}

/** Domain failure reported by the service as {"error": {code, message}}. */
export class ServiceError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

async function unwrap<T>(response: Response): Promise<T> {
  const body = await response.json().catch(() => null);
  if (!response.ok) {
    const error = body?.error ?? { code: "http_" + response.status, message: response.statusText };
    throw new ServiceError(error.code, error.message, response.status);
  }
  return body as T;
}

export class ComposerApi {
  constructor(readonly baseUrl: string = "") {}

  private async post<T>(path: string, payload: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    return unwrap<T>(response);
  }

  generate(request: GenerateRequest): Promise<GenerationResponse> {
    return this.post("/generate", request);
  }

  followRhyme(request: FollowRhymeRequest): Promise<GenerationResponse> {
    return this.post("/follow-rhyme", request);
  }

  analyze(poem: string, strictness?: string): Promise<AnalyzeResponse> {
    return this.post("/analyze", { poem, strictness: strictness ?? null });
  }

  extract(poem: string): Promise<ExtractResponse> {
    return this.post("/extract", { poem });
  }

  async ledgerCheck(text: string): Promise<LedgerCheckResponse> {
    const query = new URLSearchParams({ text });
    const response = await fetch(this.baseUrl + "/ledger/check?" + query.toString());
    return unwrap<LedgerCheckResponse>(response);
  }

  async health(): Promise<{ status: string; styles: string[] }> {
    const response = await fetch(this.baseUrl + "/health");
    return unwrap(response);
  }
}
